//! Scoring model predictions against variant groups: accuracy, consistency
//! level, TAR-SC and the consistency-level histogram.

mod evaluate;
mod report;
mod score;

use thiserror::Error;

pub use evaluate::{
    evaluate, EvalOptions, EvaluationReport, ExactRates, GroupDocument, HistogramBin,
    ReportDocument, RATE_DECIMALS,
};
pub use report::{histogram_report, HistogramReport};
pub use score::{score_group, GroupResult, MissingPolicy, Prediction, ScoredScope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no prediction for `{0}`")]
    MissingPrediction(String),
    #[error("group `{0}` has no members in the scored scope")]
    EmptyScope(String),
    #[error("prediction for unknown qid `{0}`")]
    UnknownQid(String),
    #[error("more than one prediction for `{0}`")]
    DuplicatePrediction(String),
    #[error("prediction with an empty qid")]
    EmptyPredictionQid,
    #[error("malformed predictions: {0}")]
    MalformedPredictions(String),
    #[error("malformed evaluation report: {0}")]
    BadReport(String),
}

/// Read a predictions JSONL file: one `{"qid", "prediction"}` object per line.
pub fn parse_predictions(bytes: &[u8]) -> Result<Vec<Prediction>, EvalError> {
    let text = std::str::from_utf8(bytes).map_err(|e| EvalError::MalformedPredictions(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<Prediction>(l)
                .map_err(|e| EvalError::MalformedPredictions(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
