//! Separable synthetic corpus with known structure, for exercising training
//! end to end without a real encoder.
//!
//! Each instance belongs to one of `n_clusters` pragmatic centers. Its
//! positive explicit embedding is the center plus small noise, its negative
//! explicit embedding is a different center plus noise, and its implicit
//! embedding is the center shifted along one fixed unit direction (the
//! "implicitness direction") plus noise. Texts are opaque ids; the vectors
//! are served through a [`FileBackend`](crate::backend::FileBackend).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::backend::EmbeddingRecord;
use crate::data::TrainingInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_instances: usize,
    pub n_clusters: usize,
    pub d: usize,
    /// Per-coordinate standard deviation of the additive noise.
    pub noise: f64,
    /// Implicit offsets are drawn uniformly from `[offset_min, offset_max]`.
    pub offset_min: f64,
    pub offset_max: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_instances: 2000,
            n_clusters: 20,
            d: 64,
            noise: 0.02,
            offset_min: 0.8,
            offset_max: 1.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub instances: Vec<TrainingInstance>,
    /// One record per distinct text, in instance order.
    pub embeddings: Vec<EmbeddingRecord>,
    pub centers: Vec<Vec<f64>>,
    pub direction: Vec<f64>,
}

fn unit_gaussian(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.n_clusters < 2 {
        return Err(Error::Config(
            "synthetic corpus needs at least 2 clusters".into(),
        ));
    }
    let ordered = cfg
        .offset_min
        .partial_cmp(&cfg.offset_max)
        .is_some_and(|o| o.is_le());
    if cfg.d < 2 || !cfg.noise.is_finite() || cfg.noise < 0.0 || !ordered {
        return Err(Error::Config(format!("invalid synthetic config {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let direction = unit_gaussian(cfg.d, &mut rng);
    let centers: Vec<Vec<f64>> = (0..cfg.n_clusters)
        .map(|_| {
            // keep centers orthogonal to the implicitness direction
            let mut c = unit_gaussian(cfg.d, &mut rng);
            let p: f64 = c.iter().zip(&direction).map(|(a, b)| a * b).sum();
            c.iter_mut().zip(&direction).for_each(|(a, b)| *a -= p * b);
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= n);
            c
        })
        .collect();
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?;
    let jitter = |base: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        base.iter().map(|x| x + noise.sample(rng)).collect()
    };

    let mut instances = Vec::with_capacity(cfg.n_instances);
    let mut embeddings = Vec::with_capacity(3 * cfg.n_instances);
    for n in 0..cfg.n_instances {
        let k = n % cfg.n_clusters;
        let other = (k + rng.random_range(1..cfg.n_clusters)) % cfg.n_clusters;
        let s = rng.random_range(cfg.offset_min..=cfg.offset_max);
        let shifted: Vec<f64> = centers[k]
            .iter()
            .zip(&direction)
            .map(|(c, u)| c + s * u)
            .collect();
        let implicit = jitter(&shifted, &mut rng);
        let pos = jitter(&centers[k], &mut rng);
        let neg = jitter(&centers[other], &mut rng);
        let inst = TrainingInstance {
            implicit: format!("imp-{n}"),
            explicit_pos: format!("exp-{n}-pos"),
            explicit_neg: format!("exp-{n}-neg"),
            source: format!("cluster-{k}"),
        };
        embeddings.push(EmbeddingRecord {
            text: inst.implicit.clone(),
            embedding: implicit,
        });
        embeddings.push(EmbeddingRecord {
            text: inst.explicit_pos.clone(),
            embedding: pos,
        });
        embeddings.push(EmbeddingRecord {
            text: inst.explicit_neg.clone(),
            embedding: neg,
        });
        instances.push(inst);
    }
    Ok(SyntheticCorpus {
        instances,
        embeddings,
        centers,
        direction,
    })
}
