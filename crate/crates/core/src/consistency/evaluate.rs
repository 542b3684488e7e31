use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::score::{score_group, GroupResult, MissingPolicy, Prediction, ScoredScope};
use super::EvalError;
use crate::model::Dataset;
use crate::scalar::Scalar;

/// Decimal places used for rates in the JSON document.
pub const RATE_DECIMALS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub scope: ScoredScope,
    pub missing_policy: MissingPolicy,
    /// Tally predictions for unknown qids instead of failing.
    pub lenient_unknown: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport<S> {
    /// Correct over scored across all scored members; `None` when nothing
    /// was scored.
    pub overall_accuracy: Option<S>,
    /// Unweighted mean of group accuracies.
    pub tar_sc: Option<S>,
    /// One entry per group with at least one scored member, in anchor order.
    pub group_results: Vec<GroupResult<S>>,
    /// Consistency level to number of anchors.
    pub histogram: BTreeMap<usize, usize>,
    pub scored_scope: ScoredScope,
    pub missing_policy: MissingPolicy,
    pub n_groups: usize,
    pub n_missing: usize,
    pub n_unknown: usize,
}

impl<S: Scalar> EvaluationReport<S> {
    pub fn n_scored_groups(&self) -> usize {
        self.group_results.len()
    }

    pub fn total_scored(&self) -> usize {
        self.group_results.iter().map(|g| g.scored_size).sum()
    }

    pub fn total_correct(&self) -> usize {
        self.group_results.iter().map(|g| g.correct_count).sum()
    }

    pub fn max_scored_size(&self) -> usize {
        self.group_results.iter().map(|g| g.scored_size).max().unwrap_or(0)
    }

    pub fn to_document(&self) -> ReportDocument {
        let rate = |v: &Option<S>| v.as_ref().map(|x| x.rounded(RATE_DECIMALS));
        let exact = |v: &Option<S>| v.as_ref().map(|x| x.to_string());
        ReportDocument {
            overall_accuracy: rate(&self.overall_accuracy),
            tar_sc: rate(&self.tar_sc),
            exact: ExactRates {
                overall_accuracy: exact(&self.overall_accuracy),
                tar_sc: exact(&self.tar_sc),
            },
            scored_scope: self.scored_scope,
            missing_policy: self.missing_policy,
            n_groups: self.n_groups,
            n_scored_groups: self.n_scored_groups(),
            n_scored_items: self.total_scored(),
            n_correct: self.total_correct(),
            n_missing: self.n_missing,
            n_unknown: self.n_unknown,
            histogram: self
                .histogram
                .iter()
                .map(|(&level, &count)| HistogramBin { level, count })
                .collect(),
            group_results: self
                .group_results
                .iter()
                .map(|g| GroupDocument {
                    anchor_qid: g.anchor_qid.clone(),
                    scored_size: g.scored_size,
                    correct_count: g.correct_count,
                    missing_count: g.missing_count,
                    accuracy: g.accuracy.rounded(RATE_DECIMALS),
                    accuracy_exact: g.accuracy.to_string(),
                    consistency_level: g.consistency_level,
                    majority_prediction: g.majority_prediction.clone(),
                })
                .collect(),
            metadata: None,
        }
    }

    /// Rebuild from a document; exact values are re-parsed, not the rounded
    /// ones.
    pub fn from_document(doc: &ReportDocument) -> Result<Self, EvalError> {
        let parse = |s: &str| {
            s.parse::<S>()
                .map_err(|_| EvalError::BadReport(format!("cannot parse exact value `{s}`")))
        };
        let opt = |s: &Option<String>| s.as_deref().map(parse).transpose();
        let group_results = doc
            .group_results
            .iter()
            .map(|g| {
                Ok(GroupResult {
                    anchor_qid: g.anchor_qid.clone(),
                    scored_size: g.scored_size,
                    correct_count: g.correct_count,
                    missing_count: g.missing_count,
                    accuracy: parse(&g.accuracy_exact)?,
                    consistency_level: g.consistency_level,
                    majority_prediction: g.majority_prediction.clone(),
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        Ok(Self {
            overall_accuracy: opt(&doc.exact.overall_accuracy)?,
            tar_sc: opt(&doc.exact.tar_sc)?,
            group_results,
            histogram: doc.histogram.iter().map(|b| (b.level, b.count)).collect(),
            scored_scope: doc.scored_scope,
            missing_policy: doc.missing_policy,
            n_groups: doc.n_groups,
            n_missing: doc.n_missing,
            n_unknown: doc.n_unknown,
        })
    }
}

/// Serialized evaluation report. Field order is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub overall_accuracy: Option<f64>,
    pub tar_sc: Option<f64>,
    pub exact: ExactRates,
    pub scored_scope: ScoredScope,
    pub missing_policy: MissingPolicy,
    pub n_groups: usize,
    pub n_scored_groups: usize,
    pub n_scored_items: usize,
    pub n_correct: usize,
    pub n_missing: usize,
    pub n_unknown: usize,
    pub histogram: Vec<HistogramBin>,
    pub group_results: Vec<GroupDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactRates {
    pub overall_accuracy: Option<String>,
    pub tar_sc: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramBin {
    pub level: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDocument {
    pub anchor_qid: String,
    pub scored_size: usize,
    pub correct_count: usize,
    pub missing_count: usize,
    pub accuracy: f64,
    pub accuracy_exact: String,
    pub consistency_level: usize,
    pub majority_prediction: Option<String>,
}

pub fn evaluate<S: Scalar>(
    dataset: &Dataset,
    predictions: &[Prediction],
    options: EvalOptions,
) -> Result<EvaluationReport<S>, EvalError> {
    let mut index: HashMap<String, Prediction> = HashMap::with_capacity(predictions.len());
    let mut n_unknown = 0;
    for p in predictions {
        if p.qid.is_empty() {
            return Err(EvalError::EmptyPredictionQid);
        }
        if dataset.get(&p.qid).is_none() {
            if options.lenient_unknown {
                n_unknown += 1;
                continue;
            }
            return Err(EvalError::UnknownQid(p.qid.clone()));
        }
        if index.insert(p.qid.clone(), p.clone()).is_some() {
            return Err(EvalError::DuplicatePrediction(p.qid.clone()));
        }
    }

    let groups = dataset.groups();
    let mut group_results = Vec::new();
    for group in &groups {
        match score_group::<S>(group, &index, &group.answer, options.scope, options.missing_policy) {
            Ok(result) => group_results.push(result),
            Err(EvalError::EmptyScope(_)) => continue,
            Err(e) => return Err(e),
        }
    }

    let mut histogram = BTreeMap::new();
    for g in &group_results {
        *histogram.entry(g.consistency_level).or_insert(0) += 1;
    }
    let n_missing = group_results.iter().map(|g| g.missing_count).sum();
    let scored: usize = group_results.iter().map(|g| g.scored_size).sum();
    let correct: usize = group_results.iter().map(|g| g.correct_count).sum();

    let (overall_accuracy, tar_sc) = if group_results.is_empty() {
        (None, None)
    } else {
        let sum = group_results
            .iter()
            .fold(S::zero(), |acc, g| acc + g.accuracy.clone());
        let mean = sum / S::from_counts(group_results.len() as u64, 1);
        (Some(S::from_counts(correct as u64, scored as u64)), Some(mean))
    };

    Ok(EvaluationReport {
        overall_accuracy,
        tar_sc,
        group_results,
        histogram,
        scored_scope: options.scope,
        missing_policy: options.missing_policy,
        n_groups: groups.len(),
        n_missing,
        n_unknown,
    })
}
