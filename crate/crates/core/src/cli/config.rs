use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::backend::{
    CachedBackend, EmbeddingBackend, FileBackend, ServiceBackend, ServiceConfig, ToyEncoder,
};
use crate::error::{Error, Result};
use crate::model::{Metric, ModelConfig, Transform};
use crate::training::TrainConfig;

/// Environment variable holding the default service address.
pub const EMBED_URL_ENV: &str = "IMPSCORE_EMBED_URL";

/// Flat key-value run configuration, read from TOML. Every key is optional;
/// command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub d: Option<usize>,
    pub l: Option<usize>,
    pub imp_metric: Option<Metric>,
    pub prag_metric: Option<Metric>,
    pub transform: Option<Transform>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub alpha: Option<f64>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub split: Option<[f64; 3]>,
    pub n_samples: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::Format {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    pub fn model_config(&self) -> ModelConfig {
        let base = ModelConfig::default();
        ModelConfig {
            d: self.d.unwrap_or(base.d),
            l: self.l.unwrap_or(base.l),
            imp_metric: self.imp_metric.unwrap_or(base.imp_metric),
            prag_metric: self.prag_metric.unwrap_or(base.prag_metric),
            transform: self.transform.unwrap_or(base.transform),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = TrainConfig::default();
        TrainConfig {
            gamma1: self.gamma1.unwrap_or(base.gamma1),
            gamma2: self.gamma2.unwrap_or(base.gamma2),
            alpha: self.alpha.unwrap_or(base.alpha),
            lr: self.lr.unwrap_or(base.lr),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            split: self.split.unwrap_or(base.split),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

/// `toy`, `toy:<seed>`, `file:<path>`, `service:<url>`, or `service` (address
/// from `IMPSCORE_EMBED_URL`).
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Toy { seed: u64 },
    File(PathBuf),
    Service(String),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("toy", None) => Ok(BackendSpec::Toy { seed: 0 }),
            ("toy", Some(seed)) => seed
                .parse()
                .map(|seed| BackendSpec::Toy { seed })
                .map_err(|_| Error::Config(format!("bad toy seed {seed:?}"))),
            ("file", Some(p)) if !p.is_empty() => Ok(BackendSpec::File(p.into())),
            ("service", Some(url)) if !url.is_empty() => Ok(BackendSpec::Service(url.to_string())),
            ("service", None) => match std::env::var(EMBED_URL_ENV) {
                Ok(url) if !url.is_empty() => Ok(BackendSpec::Service(url)),
                _ => Err(Error::Config(format!("backend `service` needs a URL or {EMBED_URL_ENV}"))),
            },
            _ => Err(Error::Config(format!(
                "unknown backend {s:?}; expected toy, toy:<seed>, file:<path>, service or service:<url>"
            ))),
        }
    }
}

impl BackendSpec {
    /// Instantiates the backend for `d`-dimensional embeddings, behind a cache.
    pub fn build(&self, d: usize) -> Result<Box<dyn EmbeddingBackend>> {
        let inner: Box<dyn EmbeddingBackend> = match self {
            BackendSpec::Toy { seed } => Box::new(ToyEncoder::new(d, *seed)),
            BackendSpec::File(path) => {
                let b = FileBackend::load(path)?;
                if b.dim() != d {
                    return Err(Error::Config(format!(
                        "{} holds {}-dimensional embeddings, model expects d = {d}",
                        path.display(),
                        b.dim()
                    )));
                }
                Box::new(b)
            }
            BackendSpec::Service(url) => {
                Box::new(ServiceBackend::new(ServiceConfig::new(url.clone(), d))?)
            }
        };
        Ok(Box::new(CachedBackend::new(inner)))
    }
}
