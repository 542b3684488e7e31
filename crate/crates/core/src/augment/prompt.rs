use sha2::{Digest, Sha256};

use crate::model::QAItem;

const HEAD: &str = "The original question for the image is \"";
const MID: &str = "\", and the original answer is \"";
const GENERATE: &str = "\". Please generate ";
const TAIL: &str = " new questions with answers that have exactly the same meaning as the original \
question and answer (segment with a semicolon). Do not change the answer. The question needs to be \
kept in conjunction with the image I provided you. Do not add additional information to the \
question. It is necessary to ensure that newly generated questions are semantically equivalent to \
the original question. Just return new questions.";

/// Generation prompt for `n` rephrasings of `item`. Pure template
/// substitution: the count is inserted as-is, even for `n == 1`.
pub fn build_prompt(item: &QAItem, n: usize) -> String {
    assert!(n >= 1, "at least one variant must be requested");
    format!("{HEAD}{}{MID}{}{GENERATE}{n}{TAIL}", item.question, item.answer)
}

/// Hex SHA-256 of the exact prompt text.
pub fn prompt_fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Fields recovered from a prompt produced by [`build_prompt`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptFields<'a> {
    pub question: &'a str,
    pub answer: &'a str,
    pub n: usize,
}

impl<'a> PromptFields<'a> {
    /// If the question itself contains the answer delimiter the split is
    /// taken at its first occurrence.
    pub fn extract(prompt: &'a str) -> Option<Self> {
        let body = prompt.strip_prefix(HEAD)?.strip_suffix(TAIL)?;
        let gen_at = body.rfind(GENERATE)?;
        let n = body[gen_at + GENERATE.len()..].parse().ok()?;
        let qa = &body[..gen_at];
        let mid_at = qa.find(MID)?;
        Some(Self {
            question: &qa[..mid_at],
            answer: &qa[mid_at + MID.len()..],
            n,
        })
    }
}
