use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::model::Embedding;

use super::EmbeddingBackend;

/// One line of an embeddings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub text: String,
    pub embedding: Vec<f64>,
}

/// Lookup table over precomputed embeddings.
#[derive(Debug, Clone)]
pub struct FileBackend {
    path: PathBuf,
    dim: usize,
    table: HashMap<String, Embedding>,
}

impl FileBackend {
    /// Loads a JSONL file of [`EmbeddingRecord`]s. All records must share one
    /// dimension; a text may repeat only with an identical vector.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let records: Vec<EmbeddingRecord> = read_jsonl(path)?;
        Self::from_records(records)
            .map_err(|(line, msg)| Error::Format {
                path: path.into(),
                line,
                msg,
            })
            .map(|mut b| {
                b.path = path.into();
                b
            })
    }

    fn from_records(records: Vec<EmbeddingRecord>) -> std::result::Result<Self, (usize, String)> {
        let dim = records
            .first()
            .map(|r| r.embedding.len())
            .ok_or((0, "embeddings file has no records".to_string()))?;
        let mut table = HashMap::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            let line = i + 1;
            if r.embedding.len() != dim {
                return Err((
                    line,
                    format!(
                        "embedding has dimension {}, expected {dim}",
                        r.embedding.len()
                    ),
                ));
            }
            let e = Embedding::new(r.embedding).map_err(|e| (line, e.to_string()))?;
            if let Some(prev) = table.get(&r.text) {
                if prev != &e {
                    return Err((
                        line,
                        format!("conflicting embeddings for text {:?}", r.text),
                    ));
                }
            }
            table.insert(r.text, e);
        }
        Ok(Self {
            path: PathBuf::new(),
            dim,
            table,
        })
    }

    /// In-memory backend from `(text, vector)` records.
    pub fn from_memory(records: Vec<EmbeddingRecord>) -> Result<Self> {
        Self::from_records(records)
            .map_err(|(line, msg)| Error::InvalidInput(format!("record {line}: {msg}")))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl EmbeddingBackend for FileBackend {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts
            .iter()
            .map(|t| {
                self.table
                    .get(*t)
                    .cloned()
                    .ok_or_else(|| Error::MissingEmbedding(t.to_string()))
            })
            .collect()
    }

    fn id(&self) -> String {
        format!("file:{}", self.path.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> PathBuf {
        let p = dir.path().join("emb.jsonl");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn lookup_in_query_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "{\"text\":\"a\",\"embedding\":[1,2]}\n{\"text\":\"b\",\"embedding\":[3,4]}\n",
        );
        let b = FileBackend::load(&p).unwrap();
        assert_eq!(b.dim(), 2);
        let out = b.embed(&["b", "a"]).unwrap();
        assert_eq!(out[0].values(), &[3.0, 4.0]);
        assert_eq!(out[1].values(), &[1.0, 2.0]);
        assert!(matches!(b.embed(&["c"]), Err(Error::MissingEmbedding(t)) if t == "c"));
    }

    #[test]
    fn inconsistent_dimension_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "{\"text\":\"a\",\"embedding\":[1,2,3,4]}\n{\"text\":\"b\",\"embedding\":[3,4,5]}\n",
        );
        assert!(matches!(
            FileBackend::load(&p),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "{\"text\":\"a\",\"embedding\":[1]}\n{\"text\":\"a\",\"embedding\":[1]}\n",
        );
        assert_eq!(FileBackend::load(&p).unwrap().len(), 1);
        let p = write(
            &dir,
            "{\"text\":\"a\",\"embedding\":[1]}\n{\"text\":\"a\",\"embedding\":[2]}\n",
        );
        assert!(FileBackend::load(&p).is_err());
    }

    #[test]
    fn exact_string_keys() {
        let b = FileBackend::from_memory(vec![EmbeddingRecord {
            text: "Hi".into(),
            embedding: vec![1.0],
        }])
        .unwrap();
        assert!(b.embed(&["hi"]).is_err());
        assert!(b.embed(&["Hi "]).is_err());
        assert!(b.embed(&["Hi"]).is_ok());
    }
}
