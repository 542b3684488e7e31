//! Canonical data model: QA items, provenance, datasets and variant groups.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("item has an empty qid")]
    EmptyQid,
    #[error("duplicate qid `{0}`")]
    DuplicateQid(String),
    #[error("item `{0}` has an empty question")]
    EmptyQuestion(String),
    #[error("item `{0}` has an empty answer")]
    EmptyAnswer(String),
    #[error("variant `{qid}` references missing anchor `{anchor}`")]
    DanglingAnchor { qid: String, anchor: String },
    #[error("variant `{qid}` references `{anchor}`, which is itself a variant")]
    ChainedVariant { qid: String, anchor: String },
    #[error("item `{0}` has partial provenance (generator and prompt_fingerprint must accompany anchor_qid)")]
    IncompleteProvenance(String),
    #[error("variant `{qid}` answer differs from anchor `{anchor}`")]
    AnswerMismatch { qid: String, anchor: String },
    #[error("variant `{qid}` is bound to a different image than anchor `{anchor}`")]
    ImageMismatch { qid: String, anchor: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Open,
    Closed,
}

impl AnswerType {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerType::Open => "open",
            AnswerType::Closed => "closed",
        }
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where an item came from. All fields unset means the item is an original.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub anchor_qid: Option<String>,
    pub generator: Option<String>,
    pub prompt_fingerprint: Option<String>,
}

impl Provenance {
    pub fn original() -> Self {
        Self::default()
    }

    pub fn variant(
        anchor_qid: impl Into<String>,
        generator: impl Into<String>,
        prompt_fingerprint: impl Into<String>,
    ) -> Self {
        Self {
            anchor_qid: Some(anchor_qid.into()),
            generator: Some(generator.into()),
            prompt_fingerprint: Some(prompt_fingerprint.into()),
        }
    }

    pub fn is_original(&self) -> bool {
        self.anchor_qid.is_none()
    }

    /// generator and prompt_fingerprint are set exactly when anchor_qid is.
    pub fn is_consistent(&self) -> bool {
        let anchored = self.anchor_qid.is_some();
        self.generator.is_some() == anchored && self.prompt_fingerprint.is_some() == anchored
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvenanceRepr {
    anchor_qid: Option<String>,
    generator: Option<String>,
    prompt_fingerprint: Option<String>,
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if *self == Provenance::default() {
            return serializer.serialize_none();
        }
        ProvenanceRepr {
            anchor_qid: self.anchor_qid.clone(),
            generator: self.generator.clone(),
            prompt_fingerprint: self.prompt_fingerprint.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = Option::<ProvenanceRepr>::deserialize(deserializer)?;
        Ok(repr
            .map(|r| Provenance {
                anchor_qid: r.anchor_qid,
                generator: r.generator,
                prompt_fingerprint: r.prompt_fingerprint,
            })
            .unwrap_or_default())
    }
}

/// One question/answer pair bound to an image. Field order is the canonical
/// JSONL key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAItem {
    pub qid: String,
    pub image_id: String,
    pub image_path: String,
    pub question: String,
    pub answer: String,
    pub answer_type: AnswerType,
    pub modality: Option<String>,
    pub origin: Provenance,
}

impl QAItem {
    /// An original item with its answer type derived from the answer text.
    pub fn original(
        qid: impl Into<String>,
        image_id: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        let answer = answer.into();
        let image_id = image_id.into();
        Self {
            qid: qid.into(),
            image_path: String::new(),
            image_id,
            question: question.into(),
            answer_type: classify_answer_type(&answer),
            answer,
            modality: None,
            origin: Provenance::original(),
        }
    }

    pub fn is_anchor(&self) -> bool {
        self.origin.is_original()
    }
}

/// Lowercase, trim, collapse whitespace runs and drop terminal `.`, `?` and
/// `!`. A whole trailing run is dropped so the function stays idempotent on
/// inputs like `"why??"`.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| matches!(c, '.' | '?' | '!') || c.is_whitespace())
        .to_string()
}

pub fn classify_answer_type(answer: &str) -> AnswerType {
    match normalize_answer(answer).as_str() {
        "yes" | "no" => AnswerType::Closed,
        _ => AnswerType::Open,
    }
}

/// Natural ordering for qids: digit runs compare numerically, everything else
/// bytewise, with a bytewise tie-break so the order is total. Puts `q2`
/// before `q10` and `7-v1` right after `7`.
pub fn qid_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(cx), Some(cy)) if cx.is_ascii_digit() && cy.is_ascii_digit() => {
                let dx = x.iter().take_while(|c| c.is_ascii_digit()).count();
                let dy = y.iter().take_while(|c| c.is_ascii_digit()).count();
                let nx = strip_zeros(&x[..dx]);
                let ny = strip_zeros(&y[..dy]);
                let ord = nx.len().cmp(&ny.len()).then_with(|| nx.cmp(ny));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[dx..];
                y = &y[dy..];
            }
            (Some(cx), Some(cy)) => {
                if cx != cy {
                    return cx.cmp(cy);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn strip_zeros(digits: &[u8]) -> &[u8] {
    let nz = digits.iter().take_while(|&&c| c == b'0').count();
    &digits[nz..]
}

/// Canonical generated-variant qid.
pub fn variant_qid(anchor_qid: &str, k: usize) -> String {
    format!("{anchor_qid}-v{k}")
}

/// An anchor plus its semantically equivalent variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantGroup {
    pub anchor_qid: String,
    /// Anchor first, then variants in qid order.
    pub member_qids: Vec<String>,
    pub answer: String,
}

impl VariantGroup {
    pub fn len(&self) -> usize {
        self.member_qids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_qids.is_empty()
    }

    pub fn variant_qids(&self) -> &[String] {
        &self.member_qids[1..]
    }
}

/// Partition items into variant groups, one per anchor, ordered by anchor qid.
pub fn build_groups(items: &[QAItem]) -> Result<Vec<VariantGroup>, ModelError> {
    let by_qid: HashMap<&str, &QAItem> = items.iter().map(|it| (it.qid.as_str(), it)).collect();
    let mut groups: BTreeMap<QidKey<'_>, (VariantGroup, Vec<&str>)> = BTreeMap::new();

    for item in items.iter().filter(|it| it.is_anchor()) {
        let group = VariantGroup {
            anchor_qid: item.qid.clone(),
            member_qids: vec![item.qid.clone()],
            answer: item.answer.clone(),
        };
        groups.insert(QidKey(&item.qid), (group, Vec::new()));
    }

    for item in items {
        let Some(anchor) = item.origin.anchor_qid.as_deref() else {
            continue;
        };
        let Some(anchor_item) = by_qid.get(anchor) else {
            return Err(ModelError::DanglingAnchor {
                qid: item.qid.clone(),
                anchor: anchor.to_string(),
            });
        };
        if !anchor_item.is_anchor() {
            return Err(ModelError::ChainedVariant {
                qid: item.qid.clone(),
                anchor: anchor.to_string(),
            });
        }
        if let Some((_, variants)) = groups.get_mut(&QidKey(anchor)) {
            variants.push(item.qid.as_str());
        }
    }

    Ok(groups
        .into_values()
        .map(|(mut group, mut variants)| {
            variants.sort_by(|a, b| qid_cmp(a, b));
            group.member_qids.extend(variants.into_iter().map(str::to_string));
            group
        })
        .collect())
}

#[derive(PartialEq, Eq)]
struct QidKey<'a>(&'a str);

impl Ord for QidKey<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        qid_cmp(self.0, other.0)
    }
}

impl PartialOrd for QidKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A validated collection of items, kept in canonical qid order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    language: String,
    items: Vec<QAItem>,
}

impl Dataset {
    pub const DEFAULT_LANGUAGE: &'static str = "en";

    pub fn new(name: impl Into<String>, mut items: Vec<QAItem>) -> Result<Self, ModelError> {
        validate_items(&items)?;
        items.sort_by(|a, b| qid_cmp(&a.qid, &b.qid));
        Ok(Self {
            name: name.into(),
            language: Self::DEFAULT_LANGUAGE.to_string(),
            items,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            language: Self::DEFAULT_LANGUAGE.to_string(),
            items: Vec::new(),
        }
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn items(&self) -> &[QAItem] {
        &self.items
    }

    pub fn into_items(self) -> Vec<QAItem> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, qid: &str) -> Option<&QAItem> {
        self.items
            .binary_search_by(|it| qid_cmp(&it.qid, qid))
            .ok()
            .map(|i| &self.items[i])
    }

    /// Distinct referenced images, in natural order.
    pub fn image_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .items
            .iter()
            .map(|it| it.image_id.as_str())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        ids.sort_by(|a, b| qid_cmp(a, b));
        ids
    }

    pub fn groups(&self) -> Vec<VariantGroup> {
        build_groups(&self.items).expect("dataset invariants were checked at construction")
    }
}

fn validate_items(items: &[QAItem]) -> Result<(), ModelError> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if item.qid.is_empty() {
            return Err(ModelError::EmptyQid);
        }
        if !seen.insert(item.qid.as_str()) {
            return Err(ModelError::DuplicateQid(item.qid.clone()));
        }
        if item.question.trim().is_empty() {
            return Err(ModelError::EmptyQuestion(item.qid.clone()));
        }
        if item.answer.trim().is_empty() {
            return Err(ModelError::EmptyAnswer(item.qid.clone()));
        }
        if !item.origin.is_consistent() {
            return Err(ModelError::IncompleteProvenance(item.qid.clone()));
        }
    }
    // reports dangling and chained references
    build_groups(items)?;

    let by_qid: HashMap<&str, &QAItem> = items.iter().map(|it| (it.qid.as_str(), it)).collect();
    for item in items {
        if let Some(anchor) = item.origin.anchor_qid.as_deref() {
            let anchor_item = by_qid[anchor];
            if anchor_item.answer != item.answer {
                return Err(ModelError::AnswerMismatch {
                    qid: item.qid.clone(),
                    anchor: anchor.to_string(),
                });
            }
            if anchor_item.image_id != item.image_id {
                return Err(ModelError::ImageMismatch {
                    qid: item.qid.clone(),
                    anchor: anchor.to_string(),
                });
            }
        }
    }
    Ok(())
}
