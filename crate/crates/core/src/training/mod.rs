//! Pairwise contrastive training of a [`ProjectionHead`].
//!
//! Only the head is trained; the text encoder behind the
//! [`EmbeddingBackend`] is frozen and every sentence is embedded exactly once
//! up front. Given the same instances, embeddings, configs and seed, a run
//! is bitwise reproducible.

mod adam;
mod checkpoint;
mod grad;
mod init;
mod loss;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, TrainMeta, CHECKPOINT_FORMAT_VERSION};
pub use grad::{instance_scores, loss_gradients, BatchGradients, Gradients, Triplet};
pub use init::{init_head, xavier_bound, xavier_init};
pub use loss::{implicitness_loss, pragmatic_loss, total_loss, InstanceScores};

pub(crate) use init::{rng_for, Stream};

use crate::backend::{EmbeddingBackend, EmbeddingTable};
use crate::data::TrainingInstance;
use crate::error::{Error, Result};
use crate::eval::{implicitness_accuracy_from_scores, pragmatics_accuracy_from_scores};
use crate::model::{ModelConfig, ProjectionHead};

/// Optimization hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Implicitness margin, in `[0, 2)`.
    pub gamma1: f64,
    /// Pragmatic-distance margin, `≥ 0`.
    pub gamma2: f64,
    /// Weight of the pragmatic loss, `≥ 0`.
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Train / validation / test ratios.
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma1: 0.5,
            gamma2: 0.7,
            alpha: 1.0,
            lr: 0.01,
            batch_size: 1 << 13,
            epochs: 30,
            split: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..2.0).contains(&self.gamma1) {
            return fail(format!("gamma1 must lie in [0, 2), got {}", self.gamma1));
        }
        if !(self.gamma2 >= 0.0 && self.gamma2.is_finite()) {
            return fail(format!("gamma2 must be >= 0, got {}", self.gamma2));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be > 0, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.split.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return fail(format!(
                "split ratios must be non-negative, got {:?}",
                self.split
            ));
        }
        let sum: f64 = self.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return fail(format!("split ratios must sum to 1, got {sum}"));
        }
        Ok(())
    }
}

/// Train / validation / test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle followed by a contiguous partition. Validation and test
/// sizes are `floor(n · ratio)`; the remainder goes to training.
pub fn split_dataset<T: Clone>(items: &[T], cfg: &TrainConfig) -> Result<Split<T>> {
    cfg.validate()?;
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(cfg.seed, Stream::Split));
    // the small slack keeps e.g. 30 × 0.1 from flooring to 2
    let size = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let n_val = size(cfg.split[1]);
    let n_test = size(cfg.split[2]);
    let n_train = n - n_val - n_test;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-instance loss over the epoch's batches, measured before each update.
    pub mean_loss: f64,
    pub val_imp_acc: f64,
    pub val_prag_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub implicitness: f64,
    pub pragmatics: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the returned snapshot.
    pub best_epoch: Option<usize>,
    /// Sizes of the train / validation / test partitions.
    pub split_sizes: [usize; 3],
    /// `"validation"`, or `"train"` when the validation partition is empty.
    pub selection_split: String,
    /// Accuracies of the returned head on the test partition, if nonempty.
    pub test: Option<Accuracies>,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|i| &self.epochs[i])
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub head: ProjectionHead,
    pub history: TrainHistory,
}

type Indexed = [usize; 3];

fn triplet<'a>(table: &'a EmbeddingTable, idx: &Indexed) -> Triplet<'a> {
    Triplet {
        implicit: table.get_index(idx[0]),
        explicit_pos: table.get_index(idx[1]),
        explicit_neg: table.get_index(idx[2]),
    }
}

fn accuracies(
    head: &ProjectionHead,
    table: &EmbeddingTable,
    items: &[Indexed],
) -> Result<Accuracies> {
    let scores = items
        .iter()
        .map(|idx| instance_scores(head, &triplet(table, idx)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Accuracies {
        implicitness: implicitness_accuracy_from_scores(&scores)?,
        pragmatics: pragmatics_accuracy_from_scores(&scores)?,
    })
}

/// Trains a head on `instances`; see [`train_with_observer`].
pub fn train(
    instances: &[TrainingInstance],
    backend: &dyn EmbeddingBackend,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainedModel> {
    train_with_observer(instances, backend, model_cfg, train_cfg, |_| {})
}

/// Splits `instances`, Xavier-initializes a head, and runs `epochs` passes of
/// mini-batch Adam. After every epoch the head is evaluated on the
/// validation partition; the snapshot with the highest implicitness accuracy
/// (earliest on ties) is returned. `observer` sees each epoch record as it
/// is produced.
pub fn train_with_observer(
    instances: &[TrainingInstance],
    backend: &dyn EmbeddingBackend,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainedModel> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::InvalidInput("no training instances".into()));
    }
    if backend.dim() != model_cfg.d {
        return Err(Error::Config(format!(
            "backend produces {}-dimensional embeddings but the model expects d = {}",
            backend.dim(),
            model_cfg.d
        )));
    }

    let table = EmbeddingTable::build(
        backend,
        instances.iter().flat_map(|i| {
            [
                i.implicit.as_str(),
                i.explicit_pos.as_str(),
                i.explicit_neg.as_str(),
            ]
        }),
    )?;
    let indexed: Vec<Indexed> = instances
        .iter()
        .map(|i| {
            [
                table.index_of(&i.implicit).expect("embedded above"),
                table.index_of(&i.explicit_pos).expect("embedded above"),
                table.index_of(&i.explicit_neg).expect("embedded above"),
            ]
        })
        .collect();

    let split = split_dataset(&indexed, train_cfg)?;
    let split_sizes = [split.train.len(), split.val.len(), split.test.len()];
    let mut head = init_head(model_cfg, &mut rng_for(train_cfg.seed, Stream::Init))?;
    let selection_on_val = !split.val.is_empty();
    let selection_split = if selection_on_val {
        "validation"
    } else {
        "train"
    };

    let mut history = TrainHistory {
        epochs: Vec::with_capacity(train_cfg.epochs),
        best_epoch: None,
        split_sizes,
        selection_split: selection_split.to_string(),
        test: None,
    };
    if train_cfg.epochs == 0 {
        return Ok(TrainedModel { head, history });
    }
    if split.train.is_empty() {
        return Err(Error::InvalidInput("training partition is empty".into()));
    }

    let mut adam = AdamState::for_head(&head);
    let mut shuffle_rng = rng_for(train_cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut best: Option<(f64, ProjectionHead)> = None;
    let selection = if selection_on_val {
        &split.val
    } else {
        &split.train
    };

    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch: Vec<Triplet<'_>> = chunk
                .iter()
                .map(|&i| triplet(&table, &split.train[i]))
                .collect();
            let out = loss_gradients(&batch, &head, train_cfg)?;
            loss_sum += out.loss;
            adam_step(&mut head, &out.gradients, &mut adam, train_cfg.lr)?;
        }
        let acc = accuracies(&head, &table, selection)?;
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / split.train.len() as f64,
            val_imp_acc: acc.implicitness,
            val_prag_acc: acc.pragmatics,
        };
        observer(&record);
        history.epochs.push(record);
        if best.as_ref().is_none_or(|(b, _)| acc.implicitness > *b) {
            best = Some((acc.implicitness, head.clone()));
            history.best_epoch = Some(epoch);
        }
    }

    let head = best.map(|(_, h)| h).expect("at least one epoch ran");
    if !split.test.is_empty() {
        history.test = Some(accuracies(&head, &table, &split.test)?);
    }
    Ok(TrainedModel { head, history })
}
