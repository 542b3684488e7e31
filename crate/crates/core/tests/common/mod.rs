//! Fixture generators and brute-force oracles shared by the integration and
//! acceptance tests. The oracles deliberately avoid the library's own
//! grouping, counting and normalization code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vqaug::consistency::{MissingPolicy, Prediction, ScoredScope};
use vqaug::{AnswerType, Dataset, Provenance, QAItem};

pub const ANSWERS: &[&str] = &["yes", "no", "liver", "left lung", "brain", "ct", "mri", "kidney", "2", "right"];

pub fn ratio(n: usize, d: usize) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Oracle normalization, written out char by char: ASCII lowercase, single
/// spaces, no trailing `.?!` or spaces. Fixtures only use ASCII.
pub fn oracle_normalize(s: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c == ' ' || c == '\t' || c == '\n' || c == '\r' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(c.to_ascii_lowercase());
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    let mut out = words.join(" ");
    while matches!(out.chars().last(), Some('.' | '?' | '!' | ' ')) {
        out.pop();
    }
    out
}

/// Surface noise that normalization must see through.
pub fn noisy(rng: &mut ChaCha8Rng, answer: &str) -> String {
    let mut s: String = answer
        .chars()
        .map(|c| if rng.gen_bool(0.3) { c.to_ascii_uppercase() } else { c })
        .collect();
    if rng.gen_bool(0.3) {
        s = s.replace(' ', "   ");
    }
    if rng.gen_bool(0.3) {
        s.push_str([".", "?", "!", " .", "?!"].choose(rng).unwrap());
    }
    if rng.gen_bool(0.2) {
        s = format!("  {s} ");
    }
    s
}

fn variant(anchor: &QAItem, k: usize, question: String) -> QAItem {
    QAItem {
        qid: format!("{}-v{k}", anchor.qid),
        question,
        origin: Provenance::variant(anchor.qid.clone(), "mock/rules-v1", format!("{:064x}", k)),
        ..anchor.clone()
    }
}

/// A dataset with up to `max_images` images and up to `max_per_image`
/// items on each, mixing anchors and variants.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_images: usize, max_per_image: usize) -> Dataset {
    let n_images = rng.gen_range(1..=max_images);
    let mut items = Vec::new();
    let mut next = 0usize;
    for img in 0..n_images {
        let budget = rng.gen_range(1..=max_per_image);
        let mut used = 0;
        while used < budget {
            let base = *ANSWERS.choose(rng).unwrap();
            let answer = noisy(rng, base);
            let mut anchor = QAItem::original(format!("q{next}"), format!("img{img}"), format!("question {next}?"), answer);
            next += 1;
            anchor.image_path = format!("images/img{img}.png");
            if rng.gen_bool(0.5) {
                anchor.modality = Some(["CT", "MRI", "X-Ray"].choose(rng).unwrap().to_string());
            }
            used += 1;
            let n_var = rng.gen_range(0..=3).min(budget - used);
            for k in 1..=n_var {
                items.push(variant(&anchor, k, format!("rephrased {k} of {}?", anchor.qid)));
            }
            used += n_var;
            items.push(anchor);
        }
    }
    Dataset::new("random", items).expect("generated dataset is valid")
}

/// Exotic text for serialization round trips.
pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &["a", "Z", " ", "\"", "\\", "é", "肝", "🙂", "\t", "/", "{", "}", ",", "1", "\u{2028}", "?"];
    let len = rng.gen_range(1..12);
    let s: String = (0..len).map(|_| *PIECES.choose(rng).unwrap()).collect();
    if s.trim().is_empty() {
        format!("x{s}")
    } else {
        s
    }
}

pub fn random_exotic_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let n = rng.gen_range(1..30);
    let mut items = Vec::new();
    for i in 0..n {
        let mut a = QAItem::original(format!("id{i}"), random_text(rng), random_text(rng), random_text(rng));
        a.image_path = if rng.gen_bool(0.5) { random_text(rng) } else { String::new() };
        a.modality = rng.gen_bool(0.5).then(|| random_text(rng));
        if rng.gen_bool(0.2) {
            a.answer_type = if a.answer_type == AnswerType::Open { AnswerType::Closed } else { AnswerType::Open };
        }
        for k in 1..=rng.gen_range(0..3) {
            items.push(variant(&a, k, random_text(rng)));
        }
        items.push(a);
    }
    Dataset::new(random_text(rng), items).expect("generated dataset is valid")
}

pub struct MetricsOracle {
    pub anqi: BigRational,
    pub anqa: BigRational,
    pub anqs: BigRational,
}

/// O(n^2): an item counts when some other item on its image has the same
/// normalized answer.
pub fn metrics_oracle(items: &[QAItem]) -> MetricsOracle {
    let mut images: Vec<&str> = Vec::new();
    for it in items {
        if !images.contains(&it.image_id.as_str()) {
            images.push(&it.image_id);
        }
    }
    let shares = |i: usize, open_only: bool| {
        let a = &items[i];
        if open_only && a.answer_type != AnswerType::Open {
            return false;
        }
        items.iter().enumerate().any(|(j, b)| {
            j != i
                && b.image_id == a.image_id
                && (!open_only || b.answer_type == AnswerType::Open)
                && oracle_normalize(&b.answer) == oracle_normalize(&a.answer)
        })
    };
    let anqa = (0..items.len()).filter(|&i| shares(i, false)).count();
    let anqs = (0..items.len()).filter(|&i| shares(i, true)).count();
    MetricsOracle {
        anqi: ratio(items.len(), images.len()),
        anqa: ratio(anqa, images.len()),
        anqs: ratio(anqs, images.len()),
    }
}

/// Predictions for every item: the truth with surface noise, a wrong answer,
/// or (with probability `p_missing`) nothing.
pub fn random_predictions(rng: &mut ChaCha8Rng, dataset: &Dataset, p_missing: f64) -> Vec<Prediction> {
    let mut out = Vec::new();
    for it in dataset.items() {
        if rng.gen_bool(p_missing) {
            continue;
        }
        let text = match rng.gen_range(0..3) {
            0 => noisy(rng, &it.answer),
            _ => {
                let base = *ANSWERS.choose(rng).unwrap();
                noisy(rng, base)
            }
        };
        out.push(Prediction::new(it.qid.clone(), text));
    }
    out.shuffle(rng);
    out
}

#[derive(Debug, PartialEq)]
pub enum EvalOracle {
    Missing,
    Scored {
        overall: Option<BigRational>,
        tar_sc: Option<BigRational>,
        histogram: BTreeMap<usize, usize>,
        n_scored_groups: usize,
    },
}

/// Group by scanning for items whose origin names each anchor, then score by
/// direct pairwise comparison. A missing prediction under `CountIncorrect` is
/// a distinct token that agrees with nothing.
pub fn eval_oracle(items: &[QAItem], predictions: &[Prediction], scope: ScoredScope, policy: MissingPolicy) -> EvalOracle {
    let mut group_acc = Vec::new();
    let mut histogram = BTreeMap::new();
    let (mut correct, mut scored) = (0usize, 0usize);
    for anchor in items.iter().filter(|it| it.origin.anchor_qid.is_none()) {
        let mut members: Vec<&QAItem> = Vec::new();
        if scope == ScoredScope::AnchorAndVariants {
            members.push(anchor);
        }
        members.extend(items.iter().filter(|it| it.origin.anchor_qid.as_deref() == Some(anchor.qid.as_str())));
        if members.is_empty() {
            continue;
        }
        let truth = oracle_normalize(&anchor.answer);
        let mut keys: Vec<Option<String>> = Vec::new();
        for m in &members {
            match predictions.iter().find(|p| p.qid == m.qid) {
                Some(p) => keys.push(Some(oracle_normalize(&p.prediction))),
                None if policy == MissingPolicy::Strict => return EvalOracle::Missing,
                None => keys.push(None),
            }
        }
        let c = keys.iter().filter(|k| k.as_deref() == Some(truth.as_str())).count();
        let level = (0..keys.len())
            .map(|i| match &keys[i] {
                None => 1,
                Some(k) => keys.iter().filter(|o| o.as_ref() == Some(k)).count(),
            })
            .max()
            .unwrap();
        *histogram.entry(level).or_insert(0) += 1;
        group_acc.push(ratio(c, members.len()));
        correct += c;
        scored += members.len();
    }
    let n = group_acc.len();
    if n == 0 {
        return EvalOracle::Scored { overall: None, tar_sc: None, histogram, n_scored_groups: 0 };
    }
    let sum = group_acc.into_iter().fold(ratio(0, 1), |a, b| a + b);
    EvalOracle::Scored {
        overall: Some(ratio(correct, scored)),
        tar_sc: Some(sum / ratio(n, 1)),
        histogram,
        n_scored_groups: n,
    }
}

/// `(anchor, n_variants, variant answers)` fixtures. Variant k of anchor
/// `Q{i}` gets qid `Q{i}-v{k}` and the prediction `answers[k-1]`.
pub fn group_fixture(groups: &[(&str, &[&str])]) -> (Dataset, Vec<Prediction>) {
    let mut items = Vec::new();
    let mut preds = Vec::new();
    for (i, (truth, answers)) in groups.iter().enumerate() {
        let anchor = QAItem::original(format!("Q{i}"), format!("img{i}"), format!("original {i}"), *truth);
        for (k, a) in answers.iter().enumerate() {
            let v = variant(&anchor, k + 1, format!("variant {} of {i}", k + 1));
            preds.push(Prediction::new(v.qid.clone(), *a));
            items.push(v);
        }
        items.push(anchor);
    }
    (Dataset::new("fixture", items).unwrap(), preds)
}

/// Canonical JSONL with `n_anchors` originals over `n_anchors / 2` images.
pub fn anchor_fixture(n_anchors: usize) -> Dataset {
    let questions = ["What organ is shown", "Is there a mass", "Which side is abnormal", "What modality is used"];
    let answers = ["Liver", "Yes", "Left", "CT"];
    let items = (0..n_anchors)
        .map(|i| {
            let mut it = QAItem::original(
                format!("{}", i + 1),
                format!("synpic{}", 100 + i / 2),
                format!("{} in image {}?", questions[i % 4], i / 2),
                answers[i % 4],
            );
            it.image_path = format!("images/synpic{}.jpg", 100 + i / 2);
            it.modality = Some("CT".into());
            it
        })
        .collect();
    Dataset::new("fixture", items).unwrap()
}
