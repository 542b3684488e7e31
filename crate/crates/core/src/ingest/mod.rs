//! Source-format ingestion and the canonical JSONL format.

mod canonical;
mod mapping;
mod source;

use thiserror::Error;

use crate::model::ModelError;

pub use canonical::{parse_canonical, write_canonical, CanonicalError, ITEM_KEYS, ORIGIN_KEYS};
pub use mapping::{FieldMapping, QidSynthesis};
pub use source::{parse_source, parse_sources, read_records, DropReason, IngestReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("malformed source: {0}")]
    Malformed(String),
    #[error("record {record}: mapped key `{key}` is absent")]
    MissingField { record: usize, key: String },
    #[error("record {record}: mapped key `{key}` is blank")]
    BlankField { record: usize, key: String },
    #[error("bad field mapping: {0}")]
    BadMapping(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
