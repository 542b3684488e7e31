//! Canonical JSONL: one item per line, fixed key set, lines in qid order.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Dataset, ModelError, QAItem};

pub const ITEM_KEYS: [&str; 8] = [
    "qid",
    "image_id",
    "image_path",
    "question",
    "answer",
    "answer_type",
    "modality",
    "origin",
];

pub const ORIGIN_KEYS: [&str; 3] = ["anchor_qid", "generator", "prompt_fingerprint"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CanonicalError {
    #[error("schema violation at line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
    #[error("duplicate qid `{0}`")]
    DuplicateQid(String),
    #[error("variant `{qid}` references missing anchor `{anchor}`")]
    DanglingAnchor { qid: String, anchor: String },
    #[error(transparent)]
    Invalid(ModelError),
}

impl From<ModelError> for CanonicalError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DuplicateQid(q) => CanonicalError::DuplicateQid(q),
            ModelError::DanglingAnchor { qid, anchor } => CanonicalError::DanglingAnchor { qid, anchor },
            other => CanonicalError::Invalid(other),
        }
    }
}

pub fn write_canonical(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    for item in dataset.items() {
        serde_json::to_writer(&mut out, item).expect("items serialize");
        out.push(b'\n');
    }
    out
}

pub fn parse_canonical(bytes: &[u8], name: &str) -> Result<Dataset, CanonicalError> {
    let schema = |line: usize, message: String| CanonicalError::SchemaViolation { line, message };
    if bytes.starts_with(b"\xef\xbb\xbf") {
        return Err(schema(1, "byte order mark is not allowed".into()));
    }
    let text = std::str::from_utf8(bytes).map_err(|e| schema(0, format!("not UTF-8: {e}")))?;

    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| schema(lineno, e.to_string()))?;
        let Value::Object(map) = &value else {
            return Err(schema(lineno, "line is not a JSON object".into()));
        };
        check_keys(map, &ITEM_KEYS).map_err(|m| schema(lineno, m))?;
        if let Some(Value::Object(origin)) = map.get("origin") {
            check_keys(origin, &ORIGIN_KEYS).map_err(|m| schema(lineno, format!("origin: {m}")))?;
        }
        let item: QAItem =
            serde_json::from_value(value).map_err(|e| schema(lineno, e.to_string()))?;
        items.push(item);
    }
    Ok(Dataset::new(name, items)?)
}

fn check_keys(map: &Map<String, Value>, expected: &[&str]) -> Result<(), String> {
    if let Some(unknown) = map.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(format!("unknown key `{unknown}`"));
    }
    if let Some(missing) = expected.iter().find(|k| !map.contains_key(**k)) {
        return Err(format!("missing key `{missing}`"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Provenance, QAItem};

    fn sample() -> Dataset {
        let mut a = QAItem::original("q2", "img1", "What does the picture contain?", "Brain");
        a.modality = Some("MRI".into());
        a.image_path = "img1/source.jpg".into();
        let v = QAItem {
            qid: "q2-v1".into(),
            question: "Which organ is visible?".into(),
            origin: Provenance::variant("q2", "mock/rules-v1", "abc"),
            ..a.clone()
        };
        let b = QAItem::original("q10", "img2", "Is this normal?", "Yes");
        Dataset::new("s", vec![b, v, a]).unwrap()
    }

    #[test]
    fn empty_dataset_writes_nothing() {
        assert!(write_canonical(&Dataset::empty("e")).is_empty());
    }

    #[test]
    fn writes_canonical_key_order_and_qid_order() {
        let text = String::from_utf8(write_canonical(&sample())).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            r#"{"qid":"q2","image_id":"img1","image_path":"img1/source.jpg","question":"What does the picture contain?","answer":"Brain","answer_type":"open","modality":"MRI","origin":null}"#
        );
        assert!(lines[1].ends_with(
            r#""origin":{"anchor_qid":"q2","generator":"mock/rules-v1","prompt_fingerprint":"abc"}}"#
        ));
        assert!(lines[2].starts_with(r#"{"qid":"q10""#));
        assert_eq!(write_canonical(&sample()), write_canonical(&sample()));
    }

    #[test]
    fn round_trip() {
        let ds = sample();
        assert_eq!(parse_canonical(&write_canonical(&ds), "s").unwrap(), ds);
    }

    #[test]
    fn duplicate_and_dangling_are_reported() {
        let text = String::from_utf8(write_canonical(&sample())).unwrap();
        let first = text.lines().next().unwrap();
        let dup = format!("{first}\n{text}");
        assert_eq!(
            parse_canonical(dup.as_bytes(), "s").unwrap_err(),
            CanonicalError::DuplicateQid("q2".into())
        );

        let dangling: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            parse_canonical(dangling.as_bytes(), "s").unwrap_err(),
            CanonicalError::DanglingAnchor { ref anchor, .. } if anchor == "q2"
        ));
    }

    #[test]
    fn schema_violations() {
        let cases = [
            r#"{"qid":"a","image_id":"i","image_path":"","question":"Q","answer":"x","answer_type":"open","modality":null}"#,
            r#"{"qid":"a","image_id":"i","image_path":"","question":"Q","answer":"x","answer_type":"open","modality":null,"origin":null,"extra":1}"#,
            r#"{"qid":"a","image_id":"i","image_path":"","question":"Q","answer":"x","answer_type":"maybe","modality":null,"origin":null}"#,
            r#"{"qid":"a","image_id":"i","image_path":"","question":"Q","answer":"x","answer_type":"open","modality":null,"origin":{"anchor_qid":"b"}}"#,
            r#"[1]"#,
        ];
        for case in cases {
            assert!(
                matches!(parse_canonical(case.as_bytes(), "s"), Err(CanonicalError::SchemaViolation { line: 1, .. })),
                "{case}"
            );
        }
        let mut bom = b"\xef\xbb\xbf".to_vec();
        bom.extend(write_canonical(&sample()));
        assert!(parse_canonical(&bom, "s").is_err());
    }
}
