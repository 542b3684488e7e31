//! LLM providers behind one contract: prompt in, response text out.
//!
//! The HTTP provider speaks a minimal JSON protocol, `{model, prompt,
//! temperature}` in and `{text}` out; adapters for commercial APIs are
//! expected to sit behind an endpoint of that shape.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::PromptFields;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
    #[error("prompt does not embed a question")]
    MalformedPrompt,
    #[error("bad provider config: {0}")]
    BadConfig(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<ProviderError> },
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Seconds before the first retry.
    pub base_backoff: f64,
    pub backoff_multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_backoff: 1.0, backoff_multiplier: 2.0 }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1`, for `attempt >= 1`.
    pub fn delay(&self, attempt: u32) -> Duration {
        let secs = self.base_backoff * self.backoff_multiplier.powi(attempt.saturating_sub(1) as i32);
        Duration::from_secs_f64(secs.max(0.0))
    }

    /// Run `op` until it succeeds, fails with a non-retryable error, or the
    /// attempts run out. `sleep` is called between attempts.
    pub fn run<T>(
        &self,
        mut sleep: impl FnMut(Duration),
        mut op: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    sleep(self.delay(attempt));
                    attempt += 1;
                }
                Err(e) if e.is_retryable() => {
                    return Err(ProviderError::Exhausted { attempts: attempt, last: Box::new(e) })
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    /// `mock` selects the built-in rule-based provider.
    pub provider_id: String,
    pub model: String,
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the API credential.
    #[serde(default)]
    pub auth_env_var: String,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub request_timeout: f64,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Unset means the provider's own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_parallel() -> usize {
    4
}

impl ProviderConfig {
    pub const MOCK_ID: &'static str = "mock";

    pub fn mock() -> Self {
        Self {
            provider_id: Self::MOCK_ID.into(),
            model: MockProvider::MODEL.into(),
            endpoint: String::new(),
            auth_env_var: String::new(),
            request_timeout: default_timeout(),
            max_parallel: 1,
            retry: RetryPolicy::default(),
            temperature: None,
        }
    }

    // negated comparisons so NaN fails too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::BadConfig(m.to_string()));
        if self.max_parallel < 1 {
            return bad("max_parallel must be at least 1");
        }
        if !(self.request_timeout > 0.0) {
            return bad("request_timeout must be positive");
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be at least 1");
        }
        if !(self.retry.backoff_multiplier >= 1.0) || !(self.retry.base_backoff >= 0.0) {
            return bad("retry.backoff_multiplier must be >= 1 and base_backoff >= 0");
        }
        if self.provider_id != Self::MOCK_ID && self.endpoint.is_empty() {
            return bad("endpoint is required for non-mock providers");
        }
        Ok(())
    }

    /// Build the provider, reading the credential from `env`.
    pub fn connect(
        &self,
        env: &HashMap<String, String>,
        seed: u64,
    ) -> Result<Box<dyn Provider>, ProviderError> {
        self.validate()?;
        if self.provider_id == Self::MOCK_ID {
            return Ok(Box::new(MockProvider::new(seed).with_model(self.model.clone())));
        }
        let credential = if self.auth_env_var.is_empty() {
            None
        } else {
            Some(
                env.get(&self.auth_env_var)
                    .cloned()
                    .ok_or_else(|| ProviderError::MissingCredential(self.auth_env_var.clone()))?,
            )
        };
        Ok(Box::new(HttpProvider::new(self.clone(), credential)))
    }
}

pub trait Provider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn model(&self) -> &str;
    fn temperature(&self) -> Option<f64> {
        None
    }
    /// One completed request, retries included.
    fn generate(&self, prompt: &str) -> Result<String, ProviderError>;
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct HttpProvider {
    config: ProviderConfig,
    credential: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig, credential: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, credential, agent }
    }

    fn attempt(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.credential {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let body = GenerateRequest {
            model: &self.config.model,
            prompt,
            temperature: self.config.temperature,
        };
        let mut response = request
            .send_json(&body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status { status, body: text });
        }
        serde_json::from_str::<GenerateResponse>(&text)
            .map(|r| r.text)
            .map_err(|e| ProviderError::BadResponse(e.to_string()))
    }
}

impl Provider for HttpProvider {
    fn provider_id(&self) -> &str {
        &self.config.provider_id
    }

    fn model(&self) -> &str {
        &self.config.model
    }

    fn temperature(&self) -> Option<f64> {
        self.config.temperature
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        self.config.retry.run(std::thread::sleep, || self.attempt(prompt))
    }
}

/// Offline provider that rephrases the embedded question with fixed
/// templates. Output depends only on the prompt and the seed.
#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    model: String,
}

const TEMPLATES: &[(&str, &str)] = &[
    ("Can you tell me ", "?"),
    ("Please identify ", "."),
    ("Based on the image, ", "?"),
    ("Looking at this image, ", "?"),
    ("In the image shown, ", "?"),
    ("I would like to know ", "."),
    ("Could you determine ", "?"),
    ("From this picture, ", "?"),
    ("Regarding the image, ", "?"),
    ("Tell me, ", "?"),
    ("Would you say ", "?"),
    ("Judging from the scan, ", "?"),
];

impl MockProvider {
    pub const MODEL: &'static str = "rules-v1";

    pub fn new(seed: u64) -> Self {
        Self { seed, model: Self::MODEL.to_string() }
    }

    pub fn with_model(mut self, model: String) -> Self {
        self.model = model;
        self
    }

    /// `n` distinct rephrasings of `question`.
    pub fn rephrase(&self, question: &str, n: usize) -> Vec<String> {
        let core = question_core(question);
        let offset = (self.seed % TEMPLATES.len() as u64) as usize;
        (0..n)
            .map(|k| {
                let (prefix, suffix) = TEMPLATES[(k + offset) % TEMPLATES.len()];
                match k / TEMPLATES.len() {
                    0 => format!("{prefix}{core}{suffix}"),
                    round => format!("{prefix}{core} (take {}){suffix}", round + 1),
                }
            })
            .collect()
    }
}

impl Provider for MockProvider {
    fn provider_id(&self) -> &str {
        ProviderConfig::MOCK_ID
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let fields = PromptFields::extract(prompt).ok_or(ProviderError::MalformedPrompt)?;
        if fields.question.trim().is_empty() {
            return Err(ProviderError::MalformedPrompt);
        }
        Ok(self.rephrase(fields.question, fields.n).join("; "))
    }
}

/// The question without terminal punctuation and with delimiter characters
/// neutralized, lowercased at the start unless it opens with an acronym.
fn question_core(question: &str) -> String {
    let cleaned: String = question
        .chars()
        .map(|c| match c {
            ';' | '|' => ',',
            c if c.is_whitespace() => ' ',
            c => c,
        })
        .collect();
    let cleaned = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = cleaned.trim_end_matches(['?', '.', '!', ' ']);
    let mut chars = trimmed.chars();
    match (chars.next(), chars.next()) {
        (Some(first), second) if !second.is_some_and(char::is_uppercase) => {
            first.to_lowercase().chain(trimmed.chars().skip(1)).collect()
        }
        _ => trimmed.to_string(),
    }
}
