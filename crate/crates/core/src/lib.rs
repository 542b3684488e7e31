//! Paraphrase augmentation and consistency evaluation for visual question
//! answering datasets.
//!
//! The pipeline is linear: ingest a source release into canonical JSONL,
//! augment every original question with LLM-generated rephrasings that keep
//! the answer, split by image, then measure dataset richness and score
//! externally produced model predictions for accuracy and answer
//! consistency across each group of equivalent questions.

pub mod augment;
pub mod cli;
pub mod consistency;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod split;

pub use model::{
    build_groups, classify_answer_type, normalize_answer, AnswerType, Dataset, ModelError,
    Provenance, QAItem, VariantGroup,
};
pub use scalar::{Exact, Scalar};

/// Metrics with exact rational values.
pub type ExactMetricsReport = metrics::MetricsReport<Exact>;
/// Metrics as floats.
pub type FloatMetricsReport = metrics::MetricsReport<f64>;
/// Evaluation with exact rational rates.
pub type ExactEvaluationReport = consistency::EvaluationReport<Exact>;
/// Evaluation with float rates.
pub type FloatEvaluationReport = consistency::EvaluationReport<f64>;
pub type ExactGroupResult = consistency::GroupResult<Exact>;
