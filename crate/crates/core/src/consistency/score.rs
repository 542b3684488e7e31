use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{normalize_answer, VariantGroup};
use crate::scalar::Scalar;

/// A model's answer for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub qid: String,
    pub prediction: String,
}

impl Prediction {
    pub fn new(qid: impl Into<String>, prediction: impl Into<String>) -> Self {
        Self { qid: qid.into(), prediction: prediction.into() }
    }
}

/// Which group members are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoredScope {
    #[default]
    VariantsOnly,
    AnchorAndVariants,
}

impl ScoredScope {
    pub fn members<'g>(&self, group: &'g VariantGroup) -> &'g [String] {
        match self {
            ScoredScope::VariantsOnly => group.variant_qids(),
            ScoredScope::AnchorAndVariants => &group.member_qids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Strict,
    /// A missing prediction is wrong and agrees with nothing.
    CountIncorrect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult<S> {
    pub anchor_qid: String,
    pub scored_size: usize,
    pub correct_count: usize,
    pub missing_count: usize,
    pub accuracy: S,
    /// Highest multiplicity of any single normalized prediction.
    pub consistency_level: usize,
    /// Most frequent normalized prediction, ties to the lexicographically
    /// smallest. `None` when every scored prediction was missing.
    pub majority_prediction: Option<String>,
}

pub fn score_group<S: Scalar>(
    group: &VariantGroup,
    predictions: &HashMap<String, Prediction>,
    truth: &str,
    scope: ScoredScope,
    missing_policy: MissingPolicy,
) -> Result<GroupResult<S>, EvalError> {
    let members = scope.members(group);
    if members.is_empty() {
        return Err(EvalError::EmptyScope(group.anchor_qid.clone()));
    }
    let truth = normalize_answer(truth);

    let mut correct = 0;
    let mut missing = 0;
    let mut tally: HashMap<String, usize> = HashMap::new();
    for qid in members {
        match predictions.get(qid) {
            Some(p) => {
                let normalized = normalize_answer(&p.prediction);
                if normalized == truth {
                    correct += 1;
                }
                *tally.entry(normalized).or_default() += 1;
            }
            None => match missing_policy {
                MissingPolicy::Strict => return Err(EvalError::MissingPrediction(qid.clone())),
                MissingPolicy::CountIncorrect => missing += 1,
            },
        }
    }

    let majority = tally
        .iter()
        .max_by(|(ta, ca), (tb, cb)| ca.cmp(cb).then_with(|| tb.cmp(ta)))
        .map(|(text, count)| (text.clone(), *count));
    // each missing member is its own sentinel, so it only ever reaches 1
    let consistency_level = match &majority {
        Some((_, count)) => *count,
        None => 1,
    };

    Ok(GroupResult {
        anchor_qid: group.anchor_qid.clone(),
        scored_size: members.len(),
        correct_count: correct,
        missing_count: missing,
        accuracy: S::from_counts(correct as u64, members.len() as u64),
        consistency_level,
        majority_prediction: majority.map(|(text, _)| text),
    })
}
