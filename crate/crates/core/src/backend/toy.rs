//! Deterministic stand-in encoder for tests and offline runs.
//!
//! A text is reduced to its multiset of character trigrams, each trigram is
//! hashed into one of `d` buckets with a seeded sign, and the bucket vector is
//! multiplied by a fixed seeded orthogonal matrix. Near-duplicate strings share
//! most trigrams and so land close together.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::Embedding;

use super::EmbeddingBackend;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn gram_hash(seed: u64, gram: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(gram.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Signed trigram counts. Texts shorter than three characters hash as a
/// single gram.
fn hashed_counts(text: &str, d: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut add = |gram: &str| {
        let h = gram_hash(seed, gram);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % d as u64) as usize] += sign;
    };
    match chars.len() {
        0 => {}
        1 | 2 => add(text),
        n => {
            for w in 0..n - 2 {
                let start = chars[w].0;
                let end = chars.get(w + 3).map_or(text.len(), |c| c.0);
                add(&text[start..end]);
            }
        }
    }
    v
}

/// Orthogonal `d × d` matrix from Gram–Schmidt on Gaussian rows.
fn random_rotation(d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x70_79);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for r in &rows {
                let p: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            rows.push(v);
        }
    }
    Matrix::from_rows(&rows).expect("square")
}

/// Toy encoder with its rotation precomputed.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    d: usize,
    seed: u64,
    rotation: Matrix,
}

impl ToyEncoder {
    /// Building the rotation costs `O(d³)`; reuse the encoder across calls.
    pub fn new(d: usize, seed: u64) -> Self {
        let d = d.max(1);
        Self {
            d,
            seed,
            rotation: random_rotation(d, seed),
        }
    }

    pub fn encode(&self, text: &str) -> Embedding {
        let counts = hashed_counts(text, self.d, self.seed);
        let rotated = self.rotation.left_mul(&counts).expect("length d");
        Embedding::new(rotated).expect("finite")
    }
}

impl EmbeddingBackend for ToyEncoder {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        Ok(texts.iter().map(|t| self.encode(t)).collect())
    }

    fn id(&self) -> String {
        format!("toy:d={},seed={}", self.d, self.seed)
    }
}

/// One-off encoding; see [`ToyEncoder`] for repeated use.
pub fn toy_hash_encoder(text: &str, d: usize, seed: u64) -> Embedding {
    ToyEncoder::new(d, seed).encode(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{euclidean_distance, norm};

    #[test]
    fn deterministic_and_pure() {
        let a = toy_hash_encoder("the cat sat", 16, 4);
        assert_eq!(a, toy_hash_encoder("the cat sat", 16, 4));
        assert_ne!(a, toy_hash_encoder("the cat sat", 16, 5));
    }

    #[test]
    fn empty_text_is_zero() {
        let e = toy_hash_encoder("", 8, 0);
        assert!(e.values().iter().all(|x| *x == 0.0));
        assert_eq!(e.dim(), 8);
    }

    #[test]
    fn distinct_texts_differ() {
        let enc = ToyEncoder::new(64, 0);
        assert_ne!(enc.encode("aaa"), enc.encode("zzz"));
    }

    #[test]
    fn rotation_preserves_norm_and_is_orthogonal() {
        let r = random_rotation(12, 3);
        for i in 0..12 {
            for j in 0..12 {
                let p: f64 = r.row(i).iter().zip(r.row(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-12);
            }
        }
        let counts = hashed_counts("hello world", 12, 3);
        let enc = ToyEncoder::new(12, 3);
        assert!((norm(enc.encode("hello world").values()) - norm(&counts)).abs() < 1e-12);
    }

    #[test]
    fn near_duplicates_are_close() {
        let enc = ToyEncoder::new(256, 1);
        let a = enc.encode("the weather is lovely today");
        let b = enc.encode("the weather is lovely today!");
        let c = enc.encode("quarterly revenue fell sharply");
        let near = euclidean_distance(a.values(), b.values()).unwrap();
        let far = euclidean_distance(a.values(), c.values()).unwrap();
        assert!(near < far);
    }

    #[test]
    fn multibyte_text() {
        let enc = ToyEncoder::new(16, 0);
        let e = enc.encode("héllo wörld ✓");
        assert!(norm(e.values()) > 0.0);
        assert!(norm(enc.encode("é").values()) > 0.0);
    }
}
