//! JSON checkpoint of a trained head.
//!
//! ```json
//! {"format_version":1,
//!  "model_config":{"d":768,"l":64,"imp_metric":"cosine","prag_metric":"euclidean","transform":"p_to_s"},
//!  "weights":{"W_p":[[...]],"W_s":[[...]],"W_t":[[...]]},
//!  "train_meta":{"best_epoch":3,"val_imp_acc":0.97,"val_prag_acc":0.99,"seed":0}}
//! ```
//!
//! `third_space` heads store `W_t1` and `W_t2` in place of `W_t`. Matrices
//! are row-major nested arrays of decimal floats that round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{ModelConfig, ProjectionHead, TransformWeights};

use super::TrainHistory;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub best_epoch: Option<usize>,
    pub val_imp_acc: Option<f64>,
    pub val_prag_acc: Option<f64>,
    pub seed: u64,
}

impl TrainMeta {
    pub fn from_history(history: &TrainHistory, seed: u64) -> Self {
        let best = history.best();
        Self {
            best_epoch: history.best_epoch,
            val_imp_acc: best.map(|r| r.val_imp_acc),
            val_prag_acc: best.map(|r| r.val_prag_acc),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Weights {
    #[serde(rename = "W_p")]
    pragmatic: Matrix,
    #[serde(rename = "W_s")]
    semantic: Matrix,
    #[serde(rename = "W_t", default, skip_serializing_if = "Option::is_none")]
    transform: Option<Matrix>,
    #[serde(rename = "W_t1", default, skip_serializing_if = "Option::is_none")]
    transform_pragmatic: Option<Matrix>,
    #[serde(rename = "W_t2", default, skip_serializing_if = "Option::is_none")]
    transform_semantic: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_config: ModelConfig,
    weights: Weights,
    pub train_meta: TrainMeta,
}

impl Checkpoint {
    pub fn new(head: &ProjectionHead, train_meta: TrainMeta) -> Self {
        let (transform, transform_pragmatic, transform_semantic) = match head.transform_weights() {
            TransformWeights::Single(wt) => (Some(wt.clone()), None, None),
            TransformWeights::Pair {
                pragmatic,
                semantic,
            } => (None, Some(pragmatic.clone()), Some(semantic.clone())),
        };
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model_config: *head.config(),
            weights: Weights {
                pragmatic: head.pragmatic_projection().clone(),
                semantic: head.semantic_projection().clone(),
                transform,
                transform_pragmatic,
                transform_semantic,
            },
            train_meta,
        }
    }

    /// Rebuilds the head, validating every shape against `model_config`.
    pub fn head(&self) -> Result<ProjectionHead> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint format_version {}",
                self.format_version
            )));
        }
        let w = &self.weights;
        let transform = match (&w.transform, &w.transform_pragmatic, &w.transform_semantic) {
            (Some(wt), None, None) => TransformWeights::Single(wt.clone()),
            (None, Some(t1), Some(t2)) => TransformWeights::Pair {
                pragmatic: t1.clone(),
                semantic: t2.clone(),
            },
            _ => {
                return Err(Error::Config(
                    "checkpoint must hold either W_t or both W_t1 and W_t2".into(),
                ))
            }
        };
        ProjectionHead::new(
            self.model_config,
            w.pragmatic.clone(),
            w.semantic.clone(),
            transform,
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint and returns it with its validated head.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, ProjectionHead)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| {
            let (line, msg) = (e.line(), e.to_string());
            if e.is_data() {
                Error::Schema {
                    path: path.into(),
                    line,
                    msg,
                }
            } else {
                Error::Format {
                    path: path.into(),
                    line,
                    msg,
                }
            }
        })?;
        let head = ckpt.head()?;
        Ok((ckpt, head))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Transform;
    use crate::training::init::init_head;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn meta() -> TrainMeta {
        TrainMeta {
            best_epoch: Some(2),
            val_imp_acc: Some(0.9),
            val_prag_acc: Some(0.8),
            seed: 7,
        }
    }

    #[test]
    fn round_trip_exact() {
        for transform in Transform::ALL {
            let cfg = ModelConfig {
                d: 9,
                l: 4,
                transform,
                ..ModelConfig::default()
            };
            let head = init_head(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let json = Checkpoint::new(&head, meta()).to_json();
            let back = Checkpoint::from_json(&json).unwrap();
            assert_eq!(back.head().unwrap(), head);
            assert_eq!(back.to_json(), json);
        }
    }

    #[test]
    fn uses_documented_keys() {
        let cfg = ModelConfig {
            d: 3,
            l: 2,
            ..ModelConfig::default()
        };
        let head = init_head(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&Checkpoint::new(&head, meta()).to_json()).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["model_config"]["transform"], "p_to_s");
        assert_eq!(v["model_config"]["imp_metric"], "cosine");
        assert!(v["weights"]["W_t"].is_array());
        assert!(v["weights"].get("W_t1").is_none());
        assert_eq!(v["train_meta"]["best_epoch"], 2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = ModelConfig {
            d: 3,
            l: 2,
            ..ModelConfig::default()
        };
        let head = init_head(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut v: serde_json::Value =
            serde_json::from_str(&Checkpoint::new(&head, meta()).to_json()).unwrap();
        v["model_config"]["d"] = 4.into();
        let ck: Checkpoint = serde_json::from_value(v.clone()).unwrap();
        assert!(matches!(ck.head(), Err(Error::Config(_))));

        v["model_config"]["d"] = 3.into();
        v["model_config"]["transform"] = "third_space".into();
        let ck: Checkpoint = serde_json::from_value(v).unwrap();
        assert!(ck.head().is_err());
    }
}
