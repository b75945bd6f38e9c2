//! Sources of sentence embeddings.
//!
//! Every backend maps a batch of texts to one [`Embedding`] per text, in input
//! order, all of dimension [`EmbeddingBackend::dim`]. Texts are keyed exactly
//! as given: no trimming or case folding.

mod cache;
mod file;
mod service;
mod toy;

use std::collections::HashMap;

pub use cache::CachedBackend;
pub use file::{EmbeddingRecord, FileBackend};
pub use service::{EmbedRequest, EmbedResponse, HealthResponse, ServiceBackend, ServiceConfig};
pub use toy::{toy_hash_encoder, ToyEncoder};

use crate::error::{Error, Result};
use crate::model::Embedding;

pub trait EmbeddingBackend: Send + Sync {
    fn dim(&self) -> usize;

    /// One embedding per input text, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>>;

    /// Short human-readable identifier, recorded in reports.
    fn id(&self) -> String;
}

impl<B: EmbeddingBackend + ?Sized> EmbeddingBackend for Box<B> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        (**self).embed(texts)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

impl<B: EmbeddingBackend + ?Sized> EmbeddingBackend for &B {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        (**self).embed(texts)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

/// Checks a backend's output against the request and its advertised dim.
pub(crate) fn check_output(expected_count: usize, dim: usize, out: &[Embedding]) -> Result<()> {
    if out.len() != expected_count {
        return Err(Error::Backend(format!(
            "expected {expected_count} embeddings, got {}",
            out.len()
        )));
    }
    if let Some(bad) = out.iter().find(|e| e.dim() != dim) {
        return Err(Error::Backend(format!(
            "expected dimension {dim}, got {}",
            bad.dim()
        )));
    }
    Ok(())
}

/// Embeddings of a set of distinct texts, fetched with a single backend call.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    index: HashMap<String, usize>,
    vectors: Vec<Embedding>,
}

impl EmbeddingTable {
    /// Embeds every distinct text of `texts` (first-appearance order).
    pub fn build<'a>(
        backend: &dyn EmbeddingBackend,
        texts: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        let mut unique = Vec::new();
        for t in texts {
            if !index.contains_key(t) {
                index.insert(t.to_string(), unique.len());
                unique.push(t);
            }
        }
        let vectors = if unique.is_empty() {
            Vec::new()
        } else {
            backend.embed(&unique)?
        };
        check_output(unique.len(), backend.dim(), &vectors)?;
        Ok(Self { index, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn index_of(&self, text: &str) -> Option<usize> {
        self.index.get(text).copied()
    }

    pub fn get_index(&self, i: usize) -> &Embedding {
        &self.vectors[i]
    }

    pub fn get(&self, text: &str) -> Result<&Embedding> {
        self.index_of(text)
            .map(|i| &self.vectors[i])
            .ok_or_else(|| Error::MissingEmbedding(text.to_string()))
    }
}
