//! Dataset richness metrics: QA items per image (ANQI), same-answer
//! questions per image (ANQA) and same-answer open questions per image (ANQS).
//!
//! The ANQA numerator counts every item that shares its image and its
//! normalized answer with at least one other item; ANQS applies the same
//! rule to open-type items only. Both numerators are subsets of the item
//! set, so `anqs <= anqa <= anqi` always holds.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{normalize_answer, AnswerType, Dataset, QAItem};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("dataset has no images")]
    EmptyDataset,
}

/// Number of items that share `(image_id, normalized answer)` with another
/// item, among those accepted by `include`.
fn shared_answer_count(items: &[QAItem], include: impl Fn(&QAItem) -> bool) -> u64 {
    let mut counts: HashMap<(&str, String), u64> = HashMap::new();
    for item in items.iter().filter(|it| include(it)) {
        *counts
            .entry((item.image_id.as_str(), normalize_answer(&item.answer)))
            .or_default() += 1;
    }
    counts.values().filter(|&&c| c >= 2).sum()
}

fn n_images(dataset: &Dataset) -> Result<u64, MetricsError> {
    let n = dataset
        .items()
        .iter()
        .map(|it| it.image_id.as_str())
        .collect::<HashSet<_>>()
        .len() as u64;
    if n == 0 {
        Err(MetricsError::EmptyDataset)
    } else {
        Ok(n)
    }
}

pub fn anqi<S: Scalar>(dataset: &Dataset) -> Result<S, MetricsError> {
    let images = n_images(dataset)?;
    Ok(S::from_counts(dataset.len() as u64, images))
}

pub fn anqa<S: Scalar>(dataset: &Dataset) -> Result<S, MetricsError> {
    let images = n_images(dataset)?;
    Ok(S::from_counts(shared_answer_count(dataset.items(), |_| true), images))
}

pub fn anqs<S: Scalar>(dataset: &Dataset) -> Result<S, MetricsError> {
    let images = n_images(dataset)?;
    let open = shared_answer_count(dataset.items(), |it| it.answer_type == AnswerType::Open);
    Ok(S::from_counts(open, images))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<S> {
    pub dataset: String,
    pub n_images: u64,
    pub n_items: u64,
    pub anqi: S,
    pub anqa: S,
    pub anqs: S,
    pub n_modalities: u64,
}

impl<S: Scalar> MetricsReport<S> {
    pub fn compute(dataset: &Dataset) -> Result<Self, MetricsError> {
        let n_modalities = dataset
            .items()
            .iter()
            .filter_map(|it| it.modality.as_deref())
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .collect::<HashSet<_>>()
            .len() as u64;
        Ok(Self {
            dataset: dataset.name().to_string(),
            n_images: n_images(dataset)?,
            n_items: dataset.len() as u64,
            anqi: anqi(dataset)?,
            anqa: anqa(dataset)?,
            anqs: anqs(dataset)?,
            n_modalities,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MetricsJson {
            dataset: &self.dataset,
            n_modalities: self.n_modalities,
            n_images: self.n_images,
            n_items: self.n_items,
            anqi: self.anqi.rounded(2),
            anqa: self.anqa.rounded(2),
            anqs: self.anqs.rounded(2),
            exact: ExactJson {
                anqi: self.anqi.to_string(),
                anqa: self.anqa.to_string(),
                anqs: self.anqs.to_string(),
            },
        })
        .expect("report serializes")
    }

    /// Header plus one row, in the column order of the usual dataset
    /// comparison table.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["dataset", "modalities", "images", "qa_items", "anqi", "anqa", "anqs"])
            .and_then(|_| {
                w.write_record([
                    self.dataset.clone(),
                    self.n_modalities.to_string(),
                    self.n_images.to_string(),
                    self.n_items.to_string(),
                    format!("{:.2}", self.anqi.rounded(2)),
                    format!("{:.2}", self.anqa.rounded(2)),
                    format!("{:.2}", self.anqs.rounded(2)),
                ])
            })
            .expect("in-memory csv write");
        w.into_inner().expect("in-memory csv flush")
    }
}

#[derive(Serialize)]
struct MetricsJson<'a> {
    dataset: &'a str,
    n_modalities: u64,
    n_images: u64,
    n_items: u64,
    anqi: f64,
    anqa: f64,
    anqs: f64,
    exact: ExactJson,
}

#[derive(Serialize)]
struct ExactJson {
    anqi: String,
    anqa: String,
    anqs: String,
}
