//! LLM-driven generation of semantically equivalent question variants.
//!
//! Each original item is turned into a generation prompt, sent to a
//! [`Provider`] (or replayed from the [`ResponseCache`]), and the response is
//! split, cleaned and validated before the accepted rephrasings are merged
//! back as variants that keep the anchor's image and answer.

mod cache;
mod parse;
mod pipeline;
mod prompt;
mod provider;
mod validate;

use thiserror::Error;

use crate::model::ModelError;

pub use cache::ResponseCache;
pub use parse::parse_variants;
pub use pipeline::{
    augment_dataset, write_records, AugmentOptions, AugmentOutcome, FlaggedCandidate,
    GenerationRecord, RejectedCandidate,
};
pub use prompt::{build_prompt, prompt_fingerprint, PromptFields};
pub use provider::{HttpProvider, MockProvider, Provider, ProviderConfig, ProviderError, RetryPolicy};
pub use validate::{dedup_key, validate_against, validate_variants, RejectReason, Validation, WarningReason};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AugmentError {
    #[error("dataset already contains generated variants (e.g. `{0}`)")]
    AlreadyAugmented(String),
    #[error("the variant count must be at least 1")]
    ZeroVariants,
    #[error("response contained no questions")]
    EmptyResponse,
    #[error("cache entry {path} is unusable: {reason}")]
    CacheCorrupt { path: String, reason: String },
    #[error("cache i/o: {0}")]
    CacheIo(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
