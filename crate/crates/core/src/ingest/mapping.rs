use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::model::AnswerType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QidSynthesis {
    /// Take the qid from the mapped source key.
    #[default]
    UseSource,
    /// Number records in input order, starting at 0.
    Sequential,
}

/// How to pull canonical fields out of one source record. Keys are
/// dot-separated paths; numeric segments index into arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapping {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub qid: Option<String>,
    pub image_id: String,
    /// Falls back to an empty path when unmapped.
    #[serde(default)]
    pub image_path: Option<String>,
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub answer_type: Option<String>,
    /// Source label to answer type. Labels are matched trimmed and
    /// case-insensitively.
    #[serde(default)]
    pub answer_type_values: Option<BTreeMap<String, AnswerType>>,
    #[serde(default)]
    pub modality: Option<String>,
    #[serde(default)]
    pub qid_synthesis: QidSynthesis,
    /// Only records whose key equals the given value are kept.
    #[serde(default)]
    pub filter: BTreeMap<String, Value>,
}

const PRESETS: &[(&str, &str)] = &[
    ("slake", include_str!("../../presets/slake.json")),
    ("vqarad", include_str!("../../presets/vqarad.json")),
    ("pathvqa", include_str!("../../presets/pathvqa.json")),
];

impl FieldMapping {
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(name, _)| *name)
    }

    pub fn preset(name: &str) -> Option<FieldMapping> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, json)| Self::from_json(json.as_bytes()).expect("shipped preset parses"))
    }

    pub fn from_json(bytes: &[u8]) -> Result<FieldMapping, IngestError> {
        let mapping: FieldMapping =
            serde_json::from_slice(bytes).map_err(|e| IngestError::BadMapping(e.to_string()))?;
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.question.trim().is_empty() || self.answer.trim().is_empty() {
            return Err(IngestError::BadMapping(
                "question and answer key paths must be non-empty".into(),
            ));
        }
        if self.image_id.trim().is_empty() {
            return Err(IngestError::BadMapping("image_id key path must be non-empty".into()));
        }
        if self.qid_synthesis == QidSynthesis::UseSource && self.qid.is_none() {
            return Err(IngestError::BadMapping(
                "qid_synthesis `use_source` needs a qid key path".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn lookup_answer_type(&self, label: &str) -> Option<AnswerType> {
        let wanted = label.trim();
        self.answer_type_values
            .as_ref()?
            .iter()
            .find(|(k, _)| k.trim().eq_ignore_ascii_case(wanted))
            .map(|(_, v)| *v)
    }
}

pub(crate) fn resolve<'a>(record: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(record, |v, seg| match v {
        Value::Object(map) => map.get(seg),
        Value::Array(arr) => seg.parse::<usize>().ok().and_then(|i| arr.get(i)),
        _ => None,
    })
}

/// Scalar values as text; null and containers count as absent.
pub(crate) fn scalar_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}
