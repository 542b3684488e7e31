use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::mapping::{resolve, scalar_text, FieldMapping, QidSynthesis};
use super::IngestError;
use crate::model::{classify_answer_type, Dataset, Provenance, QAItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Filtered,
    BlankQuestion,
    BlankAnswer,
    MissingImage,
    MissingQid,
}

/// Tally of what happened to the source records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub records_read: usize,
    pub items_emitted: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    /// Mapped answer-type labels with no entry in the label table; the answer
    /// type was derived from the answer text instead.
    pub unknown_answer_type_labels: usize,
}

impl IngestReport {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

/// Split a JSON array or JSONL document into its records.
pub fn read_records(bytes: &[u8]) -> Result<Vec<Value>, IngestError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| IngestError::Malformed(format!("not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let records: Vec<Value> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| IngestError::Malformed(e.to_string()))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| IngestError::Malformed(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?
    };
    if let Some(pos) = records.iter().position(|r| !r.is_object()) {
        return Err(IngestError::Malformed(format!("record {pos} is not a JSON object")));
    }
    Ok(records)
}

pub fn parse_source(
    bytes: &[u8],
    mapping: &FieldMapping,
    dataset_name: &str,
    strict: bool,
) -> Result<(Dataset, IngestReport), IngestError> {
    parse_sources([bytes], mapping, dataset_name, strict)
}

/// Ingest several source files as one dataset (e.g. train/val/test releases).
/// Sequential qids run across all inputs in order.
pub fn parse_sources<'a>(
    inputs: impl IntoIterator<Item = &'a [u8]>,
    mapping: &FieldMapping,
    dataset_name: &str,
    strict: bool,
) -> Result<(Dataset, IngestReport), IngestError> {
    mapping.validate()?;
    let mut records = Vec::new();
    for bytes in inputs {
        records.extend(read_records(bytes)?);
    }

    let mut report = IngestReport {
        records_read: records.len(),
        ..Default::default()
    };
    let mut items = Vec::new();
    for (index, record) in records.iter().enumerate() {
        match extract(record, index, mapping, strict, &mut report)? {
            Ok(item) => items.push(item),
            Err(reason) => *report.dropped.entry(reason).or_default() += 1,
        }
    }
    report.items_emitted = items.len();
    let dataset = Dataset::new(dataset_name, items)?;
    Ok((dataset, report))
}

fn extract(
    record: &Value,
    index: usize,
    mapping: &FieldMapping,
    strict: bool,
    report: &mut IngestReport,
) -> Result<Result<QAItem, DropReason>, IngestError> {
    let keep = mapping
        .filter
        .iter()
        .all(|(key, want)| resolve(record, key) == Some(want));
    if !keep {
        return Ok(Err(DropReason::Filtered));
    }

    let field = |key: &str| -> Result<Option<String>, IngestError> {
        let value = resolve(record, key).and_then(scalar_text);
        if value.is_none() && strict {
            return Err(IngestError::MissingField { record: index, key: key.to_string() });
        }
        Ok(value)
    };
    let required = |key: &str, reason: DropReason| -> Result<Result<String, DropReason>, IngestError> {
        match field(key)? {
            Some(v) if !v.trim().is_empty() => Ok(Ok(v)),
            _ if strict => Err(IngestError::BlankField { record: index, key: key.to_string() }),
            _ => Ok(Err(reason)),
        }
    };

    let qid = match (&mapping.qid_synthesis, &mapping.qid) {
        (QidSynthesis::Sequential, _) => index.to_string(),
        (QidSynthesis::UseSource, Some(key)) => match required(key, DropReason::MissingQid)? {
            Ok(q) => q.trim().to_string(),
            Err(r) => return Ok(Err(r)),
        },
        (QidSynthesis::UseSource, None) => unreachable!("validated mapping"),
    };
    let question = match required(&mapping.question, DropReason::BlankQuestion)? {
        Ok(q) => q,
        Err(r) => return Ok(Err(r)),
    };
    let answer = match required(&mapping.answer, DropReason::BlankAnswer)? {
        Ok(a) => a,
        Err(r) => return Ok(Err(r)),
    };
    let image_id = match required(&mapping.image_id, DropReason::MissingImage)? {
        Ok(i) => i,
        Err(r) => return Ok(Err(r)),
    };
    let image_path = match &mapping.image_path {
        Some(key) => field(key)?.unwrap_or_default(),
        None => String::new(),
    };
    let modality = match &mapping.modality {
        Some(key) => field(key)?.filter(|m| !m.trim().is_empty()),
        None => None,
    };
    let answer_type = match &mapping.answer_type {
        Some(key) => match field(key)? {
            Some(label) => mapping.lookup_answer_type(&label).unwrap_or_else(|| {
                report.unknown_answer_type_labels += 1;
                classify_answer_type(&answer)
            }),
            None => classify_answer_type(&answer),
        },
        None => classify_answer_type(&answer),
    };

    Ok(Ok(QAItem {
        qid,
        image_id,
        image_path,
        question,
        answer,
        answer_type,
        modality,
        origin: Provenance::original(),
    }))
}
