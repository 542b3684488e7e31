//! Image-level train/validation/test splitting.
//!
//! Every item of an image lands in the same split, so variants of a test
//! question can never appear in training.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Dataset, QAItem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("bad split ratios {0:?}: need three finite non-negative fractions summing to 1")]
    BadRatios([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios([f64; 3]);

impl SplitRatios {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, SplitError> {
        let r = [train, validation, test];
        let valid = r.iter().all(|x| x.is_finite() && *x >= 0.0)
            && (r.iter().sum::<f64>() - 1.0).abs() <= Self::TOLERANCE;
        if valid {
            Ok(Self(r))
        } else {
            Err(SplitError::BadRatios(r))
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    /// Largest-remainder apportionment of `n` images; each count is within
    /// one of `ratio * n`.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let targets = self.0.map(|r| r * n as f64);
        let mut counts = targets.map(|t| t.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = targets[a] - targets[a].floor();
            let fb = targets[b] - targets[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self([0.8, 0.1, 0.1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn parts(&self) -> [(&'static str, &Dataset); 3] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }
}

pub fn split_dataset(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Splits {
    let mut images: Vec<&str> = dataset.image_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    images.shuffle(&mut rng);

    let [n_train, n_val, _] = ratios.apportion(images.len());
    let assignment: HashMap<&str, usize> = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let bucket = if i < n_train {
                0
            } else if i < n_train + n_val {
                1
            } else {
                2
            };
            (*img, bucket)
        })
        .collect();

    let mut buckets: [Vec<QAItem>; 3] = Default::default();
    for item in dataset.items() {
        buckets[assignment[item.image_id.as_str()]].push(item.clone());
    }
    let [train, validation, test] = buckets.map(|items| {
        // a subset of a valid dataset is valid once its images stay whole,
        // because variants share their anchor's image
        Dataset::new(dataset.name(), items).expect("image-closed subset of a valid dataset")
    });
    let name = |suffix: &str| format!("{}-{suffix}", dataset.name());
    let lang = dataset.language();
    Splits {
        train: train.with_name(name("train")).with_language(lang),
        validation: validation.with_name(name("validation")).with_language(lang),
        test: test.with_name(name("test")).with_language(lang),
    }
}
