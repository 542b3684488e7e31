use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::cache::ResponseCache;
use super::parse::parse_variants;
use super::prompt::{build_prompt, prompt_fingerprint};
use super::provider::{Provider, ProviderError};
use super::validate::{validate_against, RejectReason, WarningReason};
use super::AugmentError;
use crate::model::{variant_qid, Dataset, Provenance, QAItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentOptions {
    /// Variants requested per anchor.
    pub n: usize,
    /// Upper bound on in-flight provider requests.
    pub max_parallel: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self { n: 10, max_parallel: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub text: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCandidate {
    pub text: String,
    pub reason: WarningReason,
}

/// Audit entry for one provider request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub anchor_qid: String,
    /// 0 for the first request, 1 for the shortfall follow-up.
    pub request: u32,
    pub requested: usize,
    pub provider_id: String,
    pub model: String,
    pub prompt_fingerprint: String,
    pub temperature: Option<f64>,
    pub cached: bool,
    pub raw_response: String,
    pub accepted: Vec<String>,
    pub rejected: Vec<RejectedCandidate>,
    pub warnings: Vec<FlaggedCandidate>,
    /// Set when the request failed for good; the anchor keeps whatever an
    /// earlier request delivered.
    pub error: Option<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    pub dataset: Dataset,
    pub records: Vec<GenerationRecord>,
}

impl AugmentOutcome {
    pub fn failed_anchors(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| r.request == 0 && r.error.is_some())
            .map(|r| r.anchor_qid.as_str())
            .collect()
    }

    pub fn generated(&self) -> usize {
        self.records.iter().map(|r| r.accepted.len()).sum()
    }
}

pub fn write_records(records: &[GenerationRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

struct Request {
    anchor: usize,
    requested: usize,
    prompt: String,
    fingerprint: String,
}

struct Fetched {
    response: Result<String, ProviderError>,
    cached: bool,
}

/// Generate up to `options.n` variants per original item and merge them
/// back with provenance. An anchor that comes up short gets one follow-up
/// request for the difference; a provider failure skips the anchor and the
/// run continues.
pub fn augment_dataset(
    dataset: &Dataset,
    provider: &dyn Provider,
    options: AugmentOptions,
    cache: Option<&ResponseCache>,
) -> Result<AugmentOutcome, AugmentError> {
    if options.n == 0 {
        return Err(AugmentError::ZeroVariants);
    }
    if let Some(v) = dataset.items().iter().find(|it| !it.is_anchor()) {
        return Err(AugmentError::AlreadyAugmented(v.qid.clone()));
    }
    let anchors = dataset.items();
    let generator = format!("{}/{}", provider.provider_id(), provider.model());
    let request_for = |anchor: usize, requested: usize| {
        let prompt = build_prompt(&anchors[anchor], requested);
        let fingerprint = prompt_fingerprint(&prompt);
        Request { anchor, requested, prompt, fingerprint }
    };

    // accepted variant texts per anchor, with the fingerprint that produced them
    let mut accepted: Vec<Vec<(String, String)>> = vec![Vec::new(); anchors.len()];
    let mut records = Vec::new();

    let first: Vec<Request> = (0..anchors.len()).map(|i| request_for(i, options.n)).collect();
    let fetched = fetch_all(provider, &first, options.max_parallel, cache)?;
    let mut follow_ups = Vec::new();
    for (req, got) in first.iter().zip(fetched) {
        let record = apply(provider, &anchors[req.anchor], req, got, 0, &mut accepted[req.anchor]);
        let failed = record.error.is_some();
        records.push(record);
        let have = accepted[req.anchor].len();
        if !failed && have < options.n {
            follow_ups.push(request_for(req.anchor, options.n - have));
        }
    }

    let fetched = fetch_all(provider, &follow_ups, options.max_parallel, cache)?;
    for (req, got) in follow_ups.iter().zip(fetched) {
        records.push(apply(provider, &anchors[req.anchor], req, got, 1, &mut accepted[req.anchor]));
    }
    records.sort_by(|a, b| {
        crate::model::qid_cmp(&a.anchor_qid, &b.anchor_qid).then(a.request.cmp(&b.request))
    });

    let mut items: Vec<QAItem> = anchors.to_vec();
    for (anchor, variants) in anchors.iter().zip(&accepted) {
        for (k, (question, fingerprint)) in variants.iter().enumerate() {
            items.push(QAItem {
                qid: variant_qid(&anchor.qid, k + 1),
                question: question.clone(),
                origin: Provenance::variant(&anchor.qid, &generator, fingerprint),
                ..anchor.clone()
            });
        }
    }
    let out = Dataset::new(dataset.name(), items)?.with_language(dataset.language());
    Ok(AugmentOutcome { dataset: out, records })
}

fn apply(
    provider: &dyn Provider,
    anchor: &QAItem,
    req: &Request,
    got: Fetched,
    request: u32,
    accepted: &mut Vec<(String, String)>,
) -> GenerationRecord {
    let mut record = GenerationRecord {
        anchor_qid: anchor.qid.clone(),
        request,
        requested: req.requested,
        provider_id: provider.provider_id().to_string(),
        model: provider.model().to_string(),
        prompt_fingerprint: req.fingerprint.clone(),
        temperature: provider.temperature(),
        cached: got.cached,
        raw_response: String::new(),
        accepted: Vec::new(),
        rejected: Vec::new(),
        warnings: Vec::new(),
        error: None,
        timestamp: Utc::now(),
    };
    let raw = match got.response {
        Ok(raw) => raw,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let candidates = parse_variants(&raw, anchor).unwrap_or_default();
    let prior: Vec<String> = accepted.iter().map(|(q, _)| q.clone()).collect();
    let v = validate_against(anchor, &prior, &candidates, req.requested);
    accepted.extend(v.accepted.iter().map(|q| (q.clone(), req.fingerprint.clone())));
    record.raw_response = raw;
    record.accepted = v.accepted;
    record.rejected = v
        .rejected
        .into_iter()
        .map(|(text, reason)| RejectedCandidate { text, reason })
        .collect();
    record.warnings = v
        .warnings
        .into_iter()
        .map(|(text, reason)| FlaggedCandidate { text, reason })
        .collect();
    record
}

/// Cache hits are served directly; misses go to the provider with at most
/// `max_parallel` requests in flight. Successful responses are written back
/// from this thread only.
fn fetch_all(
    provider: &dyn Provider,
    requests: &[Request],
    max_parallel: usize,
    cache: Option<&ResponseCache>,
) -> Result<Vec<Fetched>, AugmentError> {
    let key = |r: &Request| ResponseCache::key(provider.provider_id(), provider.model(), &r.fingerprint);
    let mut out: Vec<Option<Fetched>> = Vec::with_capacity(requests.len());
    let mut misses = Vec::new();
    for (i, r) in requests.iter().enumerate() {
        match cache.map(|c| c.get(&key(r))).transpose()?.flatten() {
            Some(hit) => out.push(Some(Fetched { response: Ok(hit), cached: true })),
            None => {
                out.push(None);
                misses.push(i);
            }
        }
    }

    let slots: Vec<Mutex<Option<Result<String, ProviderError>>>> =
        misses.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_parallel.max(1).min(misses.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = misses.get(j) else { break };
                let result = provider.generate(&requests[i].prompt);
                *slots[j].lock().unwrap() = Some(result);
            });
        }
    });

    for (&i, slot) in misses.iter().zip(slots) {
        let response = slot.into_inner().unwrap().expect("every miss was fetched");
        if let (Some(c), Ok(text)) = (cache, &response) {
            c.put(&key(&requests[i]), text)?;
        }
        out[i] = Some(Fetched { response, cached: false });
    }
    Ok(out.into_iter().map(|f| f.expect("filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::provider::MockProvider;
    use crate::augment::prompt::PromptFields;
    use std::collections::HashMap;
    use std::sync::atomic::AtomicU32;

    fn originals(n: usize) -> Dataset {
        let items = (0..n)
            .map(|i| QAItem::original(format!("q{i}"), format!("img{}", i / 2), format!("What organ is shown in view {i}?"), "Brain"))
            .collect();
        Dataset::new("fixture", items).unwrap()
    }

    /// Returns a fixed number of rephrasings regardless of the request and
    /// fails for selected questions.
    struct Stingy {
        per_request: usize,
        fail_on: Vec<String>,
        calls: AtomicU32,
    }

    impl Provider for Stingy {
        fn provider_id(&self) -> &str {
            "stingy"
        }
        fn model(&self) -> &str {
            "s1"
        }
        fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            let f = PromptFields::extract(prompt).unwrap();
            if self.fail_on.iter().any(|q| q == f.question) {
                return Err(ProviderError::Exhausted {
                    attempts: 3,
                    last: Box::new(ProviderError::Status { status: 503, body: String::new() }),
                });
            }
            let take = self.per_request.min(f.n);
            Ok((0..take).map(|k| format!("Variant {call}-{k} of {}", f.question)).collect::<Vec<_>>().join(";"))
        }
    }

    #[test]
    fn full_delivery_adds_n_per_anchor() {
        let ds = originals(4);
        let out = augment_dataset(&ds, &MockProvider::new(0), AugmentOptions { n: 10, max_parallel: 3 }, None).unwrap();
        assert_eq!(out.dataset.len(), 44);
        assert_eq!(out.records.len(), 4);
        assert!(out.records.iter().all(|r| r.accepted.len() == 10 && !r.cached));
        let v = out.dataset.get("q1-v10").unwrap();
        assert_eq!(v.answer, "Brain");
        assert_eq!(v.image_id, "img0");
        assert_eq!(v.origin.generator.as_deref(), Some("mock/rules-v1"));
        assert_eq!(v.origin.prompt_fingerprint.as_deref(), Some(out.records[1].prompt_fingerprint.as_str()));
        assert_eq!(out.dataset.groups().iter().map(|g| g.len()).collect::<Vec<_>>(), vec![11; 4]);
    }

    #[test]
    fn shortfall_gets_one_follow_up_then_partial() {
        let ds = originals(2);
        let p = Stingy { per_request: 3, fail_on: vec![], calls: AtomicU32::new(0) };
        let out = augment_dataset(&ds, &p, AugmentOptions { n: 10, max_parallel: 1 }, None).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 4);
        assert_eq!(out.dataset.len(), 2 + 2 * 6);
        let reqs: Vec<(u32, usize)> = out.records.iter().map(|r| (r.request, r.requested)).collect();
        assert_eq!(reqs, [(0, 10), (1, 7), (0, 10), (1, 7)]);
        assert_ne!(out.records[0].prompt_fingerprint, out.records[1].prompt_fingerprint);
        let fp_v4 = out.dataset.get("q0-v4").unwrap().origin.prompt_fingerprint.clone().unwrap();
        assert_eq!(fp_v4, out.records[1].prompt_fingerprint);
    }

    #[test]
    fn provider_failure_skips_the_anchor() {
        let ds = originals(3);
        let p = Stingy { per_request: 10, fail_on: vec!["What organ is shown in view 1?".into()], calls: AtomicU32::new(0) };
        let out = augment_dataset(&ds, &p, AugmentOptions { n: 10, max_parallel: 2 }, None).unwrap();
        assert_eq!(out.failed_anchors(), ["q1"]);
        assert_eq!(out.dataset.len(), 3 + 20);
        assert!(out.dataset.get("q1-v1").is_none());
        assert!(out.records[1].error.as_deref().unwrap().contains("gave up after 3 attempts"));
    }

    #[test]
    fn empty_responses_yield_no_variants() {
        struct Silent;
        impl Provider for Silent {
            fn provider_id(&self) -> &str { "silent" }
            fn model(&self) -> &str { "x" }
            fn generate(&self, _: &str) -> Result<String, ProviderError> { Ok(String::new()) }
        }
        let ds = originals(2);
        let out = augment_dataset(&ds, &Silent, AugmentOptions::default(), None).unwrap();
        assert_eq!(out.dataset, ds);
        assert_eq!(out.records.len(), 4);
        assert!(out.records.iter().all(|r| r.accepted.is_empty() && r.error.is_none()));
    }

    #[test]
    fn refusals() {
        let ds = originals(1);
        assert_eq!(
            augment_dataset(&ds, &MockProvider::new(0), AugmentOptions { n: 0, max_parallel: 1 }, None).unwrap_err(),
            AugmentError::ZeroVariants
        );
        let once = augment_dataset(&ds, &MockProvider::new(0), AugmentOptions::default(), None).unwrap();
        assert!(matches!(
            augment_dataset(&once.dataset, &MockProvider::new(0), AugmentOptions::default(), None),
            Err(AugmentError::AlreadyAugmented(_))
        ));
    }

    #[test]
    fn cache_replay_skips_the_provider() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let ds = originals(3);
        let p = Stingy { per_request: 10, fail_on: vec![], calls: AtomicU32::new(0) };
        let a = augment_dataset(&ds, &p, AugmentOptions { n: 5, max_parallel: 2 }, Some(&cache)).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        let b = augment_dataset(&ds, &p, AugmentOptions { n: 5, max_parallel: 2 }, Some(&cache)).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        assert_eq!(a.dataset, b.dataset);
        assert!(b.records.iter().all(|r| r.cached));
        let counts: HashMap<_, _> = b.records.iter().map(|r| (r.anchor_qid.clone(), r.accepted.len())).collect();
        assert_eq!(counts["q2"], 5);
    }
}
