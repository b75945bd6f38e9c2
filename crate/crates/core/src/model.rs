//! The scoring model: two projections of a sentence embedding into a
//! pragmatic and a semantic feature space, a linear map that places the two
//! features in a common space, and the metrics read off that geometry.
//!
//! * implicitness `I(e)`: distance between the two compared features,
//!   `1 − cos` (range `[0, 2]`) or Euclidean (range `[0, ∞)`);
//! * pragmatic distance `ΔP(a, b)`: distance between pragmatic features.
//!
//! A [`ProjectionHead`] is immutable once built and can be shared freely
//! between threads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cosine_similarity, euclidean_distance, Matrix};

/// A sentence embedding: a finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput(
                "embedding must have at least one component".into(),
            ));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "embedding component {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// `c · e`; `c` must be finite.
    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| x * c).collect())
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `1 − cosine similarity`.
    Cosine,
    Euclidean,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Cosine, Metric::Euclidean];

    /// Distance between two feature vectors under this metric.
    pub fn distance(self, u: &[f64], v: &[f64]) -> Result<f64> {
        match self {
            Metric::Cosine => Ok(1.0 - cosine_similarity(u, v)?),
            Metric::Euclidean => euclidean_distance(u, v),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Config(format!(
                "unknown metric {other:?} (expected cosine|euclidean)"
            ))),
        }
    }
}

/// Which features are mapped into which space before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `h_p · W_t` compared against `h_s`.
    PToS,
    /// `h_s · W_t` compared against `h_p`.
    SToP,
    /// `h_p · W_t1` compared against `h_s · W_t2`.
    ThirdSpace,
}

impl Transform {
    pub const ALL: [Transform; 3] = [Transform::PToS, Transform::SToP, Transform::ThirdSpace];

    fn name(self) -> &'static str {
        match self {
            Transform::PToS => "p_to_s",
            Transform::SToP => "s_to_p",
            Transform::ThirdSpace => "third_space",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p_to_s" => Ok(Transform::PToS),
            "s_to_p" => Ok(Transform::SToP),
            "third_space" => Ok(Transform::ThirdSpace),
            other => Err(Error::Config(format!(
                "unknown transform {other:?} (expected p_to_s|s_to_p|third_space)"
            ))),
        }
    }
}

/// Architecture of a projection head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Feature dimension, `1 ≤ l < d`.
    pub l: usize,
    pub imp_metric: Metric,
    pub prag_metric: Metric,
    pub transform: Transform,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 768,
            l: 64,
            imp_metric: Metric::Cosine,
            prag_metric: Metric::Euclidean,
            transform: Transform::PToS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config(
                "embedding dimension d must be at least 1".into(),
            ));
        }
        if self.l == 0 || self.l >= self.d {
            return Err(Error::Config(format!(
                "feature dimension l must satisfy 1 <= l < d (got l = {}, d = {})",
                self.l, self.d
            )));
        }
        Ok(())
    }
}

/// Weights of the space transformation.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformWeights {
    /// `W_t` (`l × l`), for [`Transform::PToS`] and [`Transform::SToP`].
    Single(Matrix),
    /// `W_t1` applied to pragmatic and `W_t2` to semantic features.
    Pair { pragmatic: Matrix, semantic: Matrix },
}

/// The learnable state of the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    config: ModelConfig,
    pragmatic: Matrix,
    semantic: Matrix,
    transform: TransformWeights,
}

impl ProjectionHead {
    /// Checks every shape against `config` and that all weights are finite.
    pub fn new(
        config: ModelConfig,
        pragmatic: Matrix,
        semantic: Matrix,
        transform: TransformWeights,
    ) -> Result<Self> {
        config.validate()?;
        let (d, l) = (config.d, config.l);
        let check = |name: &str, m: &Matrix, rows: usize, cols: usize| -> Result<()> {
            if m.shape() != (rows, cols) {
                return Err(Error::Config(format!(
                    "{name} has shape {}x{}, expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} contains non-finite entries"
                )));
            }
            Ok(())
        };
        check("W_p", &pragmatic, d, l)?;
        check("W_s", &semantic, d, l)?;
        match (&transform, config.transform) {
            (TransformWeights::Single(wt), Transform::PToS | Transform::SToP) => {
                check("W_t", wt, l, l)?
            }
            (
                TransformWeights::Pair {
                    pragmatic,
                    semantic,
                },
                Transform::ThirdSpace,
            ) => {
                check("W_t1", pragmatic, l, l)?;
                check("W_t2", semantic, l, l)?;
            }
            (TransformWeights::Single(_), Transform::ThirdSpace) => {
                return Err(Error::Config(
                    "third_space transform requires W_t1 and W_t2".into(),
                ))
            }
            (TransformWeights::Pair { .. }, _) => {
                return Err(Error::Config(format!(
                    "{} transform takes a single W_t, got W_t1/W_t2",
                    config.transform
                )))
            }
        }
        Ok(Self {
            config,
            pragmatic,
            semantic,
            transform,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn pragmatic_projection(&self) -> &Matrix {
        &self.pragmatic
    }

    pub fn semantic_projection(&self) -> &Matrix {
        &self.semantic
    }

    pub fn transform_weights(&self) -> &TransformWeights {
        &self.transform
    }

    /// All weight matrices in canonical order: `W_p, W_s, W_t` or
    /// `W_p, W_s, W_t1, W_t2`.
    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.pragmatic, &self.semantic];
        match &self.transform {
            TransformWeights::Single(wt) => out.push(wt),
            TransformWeights::Pair {
                pragmatic,
                semantic,
            } => {
                out.push(pragmatic);
                out.push(semantic);
            }
        }
        out
    }

    pub(crate) fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.pragmatic, &mut self.semantic];
        match &mut self.transform {
            TransformWeights::Single(wt) => out.push(wt),
            TransformWeights::Pair {
                pragmatic,
                semantic,
            } => {
                out.push(pragmatic);
                out.push(semantic);
            }
        }
        out
    }

    /// Names matching [`ProjectionHead::matrices`], as used in checkpoints.
    pub fn matrix_names(&self) -> &'static [&'static str] {
        match self.transform {
            TransformWeights::Single(_) => &["W_p", "W_s", "W_t"],
            TransformWeights::Pair { .. } => &["W_p", "W_s", "W_t1", "W_t2"],
        }
    }

    fn check_embedding(&self, e: &Embedding) -> Result<()> {
        if e.dim() != self.config.d {
            return Err(Error::dim(self.config.d, e.dim()));
        }
        Ok(())
    }

    pub fn project(&self, e: &Embedding) -> Result<FeatureSet> {
        project(e, self)
    }

    pub fn implicitness(&self, e: &Embedding) -> Result<f64> {
        implicitness_score(e, self)
    }

    pub fn pragmatic_distance(&self, a: &Embedding, b: &Embedding) -> Result<f64> {
        pragmatic_distance(a, b, self)
    }
}

/// Features in the comparison space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// The transformed feature (`ĥ`) for `p_to_s` / `s_to_p`.
    Hat(Vec<f64>),
    /// `h_tp` and `h_ts` for `third_space`.
    Third {
        pragmatic: Vec<f64>,
        semantic: Vec<f64>,
    },
}

/// Projected features of one embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSet {
    pub pragmatic: Vec<f64>,
    pub semantic: Vec<f64>,
    pub comparison: Option<Comparison>,
}

impl FeatureSet {
    /// The two vectors whose distance is the implicitness score.
    pub fn compared(&self, transform: Transform) -> Option<(&[f64], &[f64])> {
        match (&self.comparison, transform) {
            (Some(Comparison::Hat(hat)), Transform::PToS) => Some((hat, &self.semantic)),
            (Some(Comparison::Hat(hat)), Transform::SToP) => Some((hat, &self.pragmatic)),
            (
                Some(Comparison::Third {
                    pragmatic,
                    semantic,
                }),
                Transform::ThirdSpace,
            ) => Some((pragmatic, semantic)),
            _ => None,
        }
    }
}

/// `h_p = e·W_p`, `h_s = e·W_s`, followed by [`transform`].
pub fn project(e: &Embedding, head: &ProjectionHead) -> Result<FeatureSet> {
    head.check_embedding(e)?;
    let features = FeatureSet {
        pragmatic: head.pragmatic.left_mul(e.values())?,
        semantic: head.semantic.left_mul(e.values())?,
        comparison: None,
    };
    transform(features, head)
}

/// Fills in the comparison-space features of `f`.
pub fn transform(mut f: FeatureSet, head: &ProjectionHead) -> Result<FeatureSet> {
    let comparison = match (&head.transform, head.config.transform) {
        (TransformWeights::Single(wt), Transform::PToS) => {
            Comparison::Hat(wt.left_mul(&f.pragmatic)?)
        }
        (TransformWeights::Single(wt), Transform::SToP) => {
            Comparison::Hat(wt.left_mul(&f.semantic)?)
        }
        (
            TransformWeights::Pair {
                pragmatic,
                semantic,
            },
            Transform::ThirdSpace,
        ) => Comparison::Third {
            pragmatic: pragmatic.left_mul(&f.pragmatic)?,
            semantic: semantic.left_mul(&f.semantic)?,
        },
        _ => {
            return Err(Error::Config(
                "transform weights do not match the configured transform".into(),
            ))
        }
    };
    f.comparison = Some(comparison);
    Ok(f)
}

/// Implicitness of a single sentence embedding.
pub fn implicitness_score(e: &Embedding, head: &ProjectionHead) -> Result<f64> {
    let features = project(e, head)?;
    let (a, b) = features
        .compared(head.config.transform)
        .ok_or_else(|| Error::Config("missing comparison features".into()))?;
    head.config.imp_metric.distance(a, b)
}

/// Distance between the pragmatic features of two embeddings.
pub fn pragmatic_distance(a: &Embedding, b: &Embedding, head: &ProjectionHead) -> Result<f64> {
    head.check_embedding(a)?;
    head.check_embedding(b)?;
    let ha = head.pragmatic.left_mul(a.values())?;
    let hb = head.pragmatic.left_mul(b.values())?;
    head.config.prag_metric.distance(&ha, &hb)
}
