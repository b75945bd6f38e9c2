//! Reference-free implicitness scoring.
//!
//! A sentence embedding `e` is projected into a pragmatic feature
//! `h_p = e·W_p` and a semantic feature `h_s = e·W_s`. A learned linear map
//! carries one feature into the space of the other (or both into a third
//! space), and the implicitness score is the disagreement between the two:
//! `1 − cos` (in `[0, 2]`) or Euclidean distance. Pragmatic distance between
//! two sentences compares their pragmatic features directly.
//!
//! The crate is organized as:
//!
//! * [`model`]: the projection head and the scoring functions;
//! * [`training`]: margin ranking losses, analytic gradients, Adam, the
//!   epoch loop and checkpoints;
//! * [`data`]: positive pairs, negative sampling, dataset statistics;
//! * [`backend`]: embedding providers (toy hashing encoder, precomputed file,
//!   HTTP service, cache);
//! * [`eval`]: accuracies, rank correlations, ranking and choice tasks;
//! * [`analysis`]: corpus scoring, binning and pragmatic diversity;
//! * [`cli`]: the `impscore` command-line tool.
//!
//! ```
//! use impscore::backend::{EmbeddingBackend, ToyEncoder};
//! use impscore::model::ModelConfig;
//! use impscore::training::init_head;
//! use rand::SeedableRng;
//!
//! let config = ModelConfig { d: 32, l: 8, ..ModelConfig::default() };
//! let head = init_head(&config, &mut rand_chacha::ChaCha8Rng::seed_from_u64(7))?;
//! let encoder = ToyEncoder::new(32, 0);
//! let e = encoder.embed(&["Can you pass the salt?"])?.remove(0);
//! let score = head.implicitness(&e)?;
//! assert!((0.0..=2.0).contains(&score));
//! # Ok::<(), impscore::Error>(())
//! ```

pub mod analysis;
pub mod backend;
pub mod cli;
pub mod data;
mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use model::{Embedding, Metric, ModelConfig, ProjectionHead, Transform};
pub use training::{train, TrainConfig, TrainHistory, TrainedModel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
