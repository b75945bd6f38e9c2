//! Training data: positive (implicit, explicit) pairs, negative sampling by
//! inner-dataset replacement, and descriptive corpus statistics.
//!
//! A negative for a pair is the explicit sentence of another pair drawn from
//! the same source dataset, never across sources.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{read_jsonl, read_jsonl_checked};
use crate::training::{rng_for, Stream};

/// An (implicit, explicit) pair expressing the same intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositivePair {
    pub implicit: String,
    pub explicit: String,
    pub source: String,
}

/// Anchor `s1`, its positive explicit `s2`, and a negative explicit `s3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingInstance {
    pub implicit: String,
    pub explicit_pos: String,
    pub explicit_neg: String,
    pub source: String,
}

/// Reads `pairs.jsonl`, rejecting records with empty fields.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PositivePair>> {
    read_jsonl_checked(path, |p: &PositivePair| {
        [
            ("implicit", &p.implicit),
            ("explicit", &p.explicit),
            ("source", &p.source),
        ]
        .into_iter()
        .find(|(_, v)| v.is_empty())
        .map(|(key, _)| format!("field {key:?} is empty"))
    })
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<TrainingInstance>> {
    read_jsonl(path)
}

/// Why a pair produced no instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// The pair is the only member of its source.
    SingletonSource,
    /// Every draw returned the pair's own explicit text.
    DuplicateExplicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedPair {
    /// Position of the pair in the input list.
    pub index: usize,
    pub source: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSampling {
    pub instances: Vec<TrainingInstance>,
    pub skipped: Vec<SkippedPair>,
}

/// For each pair, draws the explicit sentence of a uniformly chosen other pair
/// from the same source. A draw whose text equals the pair's own explicit is
/// redrawn, at most group-size times, after which the pair is skipped.
/// Negatives may be reused across anchors. Output follows input order.
pub fn generate_negatives(pairs: &[PositivePair], seed: u64) -> NegativeSampling {
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut position = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let g = groups.entry(p.source.as_str()).or_default();
        position.push(g.len());
        g.push(i);
    }

    let mut rng = rng_for(seed, Stream::Negatives);
    let mut instances = Vec::with_capacity(pairs.len());
    let mut skipped = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let group = &groups[p.source.as_str()];
        let skip = |reason| SkippedPair {
            index: i,
            source: p.source.clone(),
            reason,
        };
        if group.len() < 2 {
            skipped.push(skip(SkipReason::SingletonSource));
            continue;
        }
        let own = position[i];
        let mut negative = None;
        for _ in 0..group.len() {
            let r = rng.random_range(0..group.len() - 1);
            let other = group[if r >= own { r + 1 } else { r }];
            if pairs[other].explicit != p.explicit {
                negative = Some(&pairs[other].explicit);
                break;
            }
        }
        match negative {
            Some(neg) => instances.push(TrainingInstance {
                implicit: p.implicit.clone(),
                explicit_pos: p.explicit.clone(),
                explicit_neg: neg.clone(),
                source: p.source.clone(),
            }),
            None => skipped.push(skip(SkipReason::DuplicateExplicit)),
        }
    }
    NegativeSampling { instances, skipped }
}

/// Character-length statistics; standard deviations are population values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_pos_pairs: usize,
    pub n_neg_pairs: usize,
    pub avg_len_implicit: f64,
    pub std_len_implicit: f64,
    pub avg_len_explicit: f64,
    pub std_len_explicit: f64,
}

/// Mean and population standard deviation; `(0, 0)` for an empty input.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.into_iter().collect();
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Lengths count Unicode scalar values, spaces included.
pub fn dataset_stats(instances: &[TrainingInstance]) -> DatasetStats {
    let chars = |s: &String| s.chars().count() as f64;
    let (avg_len_implicit, std_len_implicit) =
        mean_std(instances.iter().map(|i| chars(&i.implicit)));
    let (avg_len_explicit, std_len_explicit) =
        mean_std(instances.iter().map(|i| chars(&i.explicit_pos)));
    DatasetStats {
        n_pos_pairs: instances.len(),
        n_neg_pairs: instances.len(),
        avg_len_implicit,
        std_len_implicit,
        avg_len_explicit,
        std_len_explicit,
    }
}
