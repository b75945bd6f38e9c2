use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::Result;
use crate::model::Embedding;

use super::{check_output, EmbeddingBackend};

/// Memoizes another backend per exact text. Misses from one call are sent to
/// the inner backend as a single batch of distinct texts.
pub struct CachedBackend<B> {
    inner: B,
    map: Mutex<HashMap<String, Embedding>>,
    hits: AtomicU64,
    misses: AtomicU64,
    inner_calls: AtomicU64,
}

impl<B: EmbeddingBackend> CachedBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            map: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            inner_calls: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// Distinct texts fetched from the inner backend.
    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn inner_calls(&self) -> u64 {
        self.inner_calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: EmbeddingBackend> EmbeddingBackend for CachedBackend<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        let mut missing: Vec<&str> = Vec::new();
        {
            let map = self.map.lock().expect("cache lock poisoned");
            for t in texts {
                if map.contains_key(*t) {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                } else if !missing.contains(t) {
                    missing.push(t);
                }
            }
        }
        if !missing.is_empty() {
            // the inner call runs unlocked; a concurrent duplicate fetch yields the same vector
            let fetched = self.inner.embed(&missing)?;
            check_output(missing.len(), self.inner.dim(), &fetched)?;
            self.inner_calls.fetch_add(1, Ordering::Relaxed);
            self.misses
                .fetch_add(missing.len() as u64, Ordering::Relaxed);
            let mut map = self.map.lock().expect("cache lock poisoned");
            for (t, e) in missing.into_iter().zip(fetched) {
                map.entry(t.to_string()).or_insert(e);
            }
        }
        let map = self.map.lock().expect("cache lock poisoned");
        Ok(texts.iter().map(|t| map[*t].clone()).collect())
    }

    fn id(&self) -> String {
        self.inner.id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ToyEncoder;
    use std::sync::Mutex as StdMutex;

    /// Records every batch it is asked for.
    struct Spy {
        inner: ToyEncoder,
        calls: StdMutex<Vec<Vec<String>>>,
    }

    impl EmbeddingBackend for Spy {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
            self.calls
                .lock()
                .unwrap()
                .push(texts.iter().map(|t| t.to_string()).collect());
            self.inner.embed(texts)
        }
        fn id(&self) -> String {
            "spy".into()
        }
    }

    fn spy() -> Spy {
        Spy {
            inner: ToyEncoder::new(8, 0),
            calls: StdMutex::new(Vec::new()),
        }
    }

    #[test]
    fn repeated_text_fetched_once() {
        let c = CachedBackend::new(spy());
        let out = c.embed(&["a", "a"]).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(
            *c.inner().calls.lock().unwrap(),
            vec![vec!["a".to_string()]]
        );
        c.embed(&["a"]).unwrap();
        assert_eq!(c.inner().calls.lock().unwrap().len(), 1);
        assert_eq!(c.hits(), 1);
    }

    #[test]
    fn mixed_batch_sends_only_misses() {
        let c = CachedBackend::new(spy());
        c.embed(&["a", "b"]).unwrap();
        let out = c.embed(&["c", "a", "d", "b"]).unwrap();
        let calls = c.inner().calls.lock().unwrap().clone();
        assert_eq!(calls[1], vec!["c".to_string(), "d".to_string()]);
        let direct = c.inner().inner.embed(&["c", "a", "d", "b"]).unwrap();
        assert_eq!(out, direct);
    }
}
