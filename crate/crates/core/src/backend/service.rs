//! HTTP client for a remote sentence-encoder service.
//!
//! Wire protocol (all JSON, UTF-8):
//!
//! * `POST {base}/embed` with `{"texts": [str]}` returns
//!   `{"embeddings": [[float; dim]], "dim": int}`, one vector per text in order;
//! * `GET {base}/health` returns `{"status": "ok", "model": str, "dim": int}`.
//!
//! The JSON schemas for these bodies live in `schemas/` at the crate root.
//! Only plain `http://` endpoints are supported.

use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Embedding;

use super::{check_output, EmbeddingBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub base_url: String,
    /// Expected embedding dimension.
    pub dim: usize,
    /// Per-request timeout.
    pub timeout: Duration,
    /// Maximum texts per request.
    pub batch_size: usize,
    /// Retries after the first attempt, for transport errors and 5xx responses.
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
}

impl ServiceConfig {
    pub fn new(base_url: impl Into<String>, dim: usize) -> Self {
        Self {
            base_url: base_url.into(),
            dim,
            timeout: Duration::from_secs(30),
            batch_size: 64,
            max_retries: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

enum Failure {
    Transient(String),
    Fatal(String),
}

pub struct ServiceBackend {
    config: ServiceConfig,
    agent: ureq::Agent,
    retries: AtomicU64,
    requests: AtomicU64,
}

impl ServiceBackend {
    pub fn new(config: ServiceConfig) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::Config("service batch size must be positive".into()));
        }
        if config.dim == 0 {
            return Err(Error::Config("service dimension must be positive".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            retries: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// Retries performed so far.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn health(&self) -> Result<HealthResponse> {
        let url = self.url("health");
        self.with_retries(&url, || {
            let mut resp = self
                .agent
                .get(&url)
                .call()
                .map_err(|e| Failure::Transient(e.to_string()))?;
            classify_status(resp.status().as_u16())?;
            resp.body_mut()
                .read_json::<HealthResponse>()
                .map_err(|e| Failure::Fatal(format!("malformed health body: {e}")))
        })
    }

    fn with_retries<T>(
        &self,
        context: &str,
        mut attempt: impl FnMut() -> std::result::Result<T, Failure>,
    ) -> Result<T> {
        let mut delay = self.config.backoff;
        let mut tries = 0;
        loop {
            self.requests.fetch_add(1, Ordering::Relaxed);
            match attempt() {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(msg)) => {
                    return Err(Error::Backend(format!("{context}: {msg}")))
                }
                Err(Failure::Transient(msg)) if tries >= self.config.max_retries => {
                    return Err(Error::Backend(format!(
                        "{context}: {msg} (after {tries} retries)"
                    )))
                }
                Err(Failure::Transient(_)) => {
                    tries += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }

    fn embed_batch(&self, texts: &[&str], offset: usize) -> Result<Vec<Embedding>> {
        let url = self.url("embed");
        let body = EmbedRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        };
        let context = format!("POST {url} (texts {}..{})", offset, offset + texts.len());
        let resp = self.with_retries(&context, || {
            let mut resp = self
                .agent
                .post(&url)
                .send_json(&body)
                .map_err(|e| Failure::Transient(e.to_string()))?;
            classify_status(resp.status().as_u16())?;
            resp.body_mut()
                .read_json::<EmbedResponse>()
                .map_err(|e| Failure::Fatal(format!("malformed embed body: {e}")))
        })?;
        if resp.dim != self.config.dim {
            return Err(Error::Backend(format!(
                "{context}: service reports dim {}, expected {}",
                resp.dim, self.config.dim
            )));
        }
        let out = resp
            .embeddings
            .into_iter()
            .map(|v| Embedding::new(v).map_err(|e| Error::Backend(format!("{context}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        check_output(texts.len(), self.config.dim, &out)
            .map_err(|e| Error::Backend(format!("{context}: {e}")))?;
        Ok(out)
    }
}

fn classify_status(status: u16) -> std::result::Result<(), Failure> {
    match status {
        200 => Ok(()),
        429 | 500..=599 => Err(Failure::Transient(format!("HTTP {status}"))),
        other => Err(Failure::Fatal(format!("HTTP {other}"))),
    }
}

impl EmbeddingBackend for ServiceBackend {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        let mut out = Vec::with_capacity(texts.len());
        for (k, chunk) in texts.chunks(self.config.batch_size).enumerate() {
            out.extend(self.embed_batch(chunk, k * self.config.batch_size)?);
        }
        Ok(out)
    }

    fn id(&self) -> String {
        format!("service:{}", self.config.base_url)
    }
}
