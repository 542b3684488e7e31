use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::QAItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Empty,
    DuplicateOfOriginal,
    Duplicate,
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningReason {
    /// The candidate spells out the ground-truth answer.
    AnswerLeak,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Validation {
    pub accepted: Vec<String>,
    pub rejected: Vec<(String, RejectReason)>,
    /// Accepted candidates that still deserve a look.
    pub warnings: Vec<(String, WarningReason)>,
}

/// Lowercase with whitespace collapsed; two candidates with equal keys are
/// duplicates.
pub fn dedup_key(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn validate_variants(original: &QAItem, candidates: &[String], n: usize) -> Validation {
    validate_against(original, &[], candidates, n)
}

/// Like [`validate_variants`], but also treats `prior` (variants accepted
/// by an earlier request for the same anchor) as already taken.
pub fn validate_against(
    original: &QAItem,
    prior: &[String],
    candidates: &[String],
    n: usize,
) -> Validation {
    let original_key = dedup_key(&original.question);
    let mut seen: HashSet<String> = prior.iter().map(|p| dedup_key(p)).collect();
    let mut out = Validation::default();

    for candidate in candidates {
        let text = candidate.trim();
        let key = dedup_key(text);
        let reason = if key.is_empty() {
            Some(RejectReason::Empty)
        } else if key == original_key {
            Some(RejectReason::DuplicateOfOriginal)
        } else if seen.contains(&key) {
            Some(RejectReason::Duplicate)
        } else if out.accepted.len() >= n {
            Some(RejectReason::Overflow)
        } else {
            None
        };
        match reason {
            Some(r) => out.rejected.push((candidate.clone(), r)),
            None => {
                if contains_answer(text, &original.answer) {
                    out.warnings.push((text.to_string(), WarningReason::AnswerLeak));
                }
                seen.insert(key);
                out.accepted.push(text.to_string());
            }
        }
    }
    out
}

/// Whole-word, case-insensitive containment of the answer's tokens.
fn contains_answer(text: &str, answer: &str) -> bool {
    let tokens = |s: &str| -> Vec<String> {
        s.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    };
    let needle = tokens(answer);
    if needle.is_empty() {
        let a = answer.trim();
        return !a.is_empty() && text.contains(a);
    }
    let hay = tokens(text);
    hay.windows(needle.len()).any(|w| w == needle.as_slice())
}
