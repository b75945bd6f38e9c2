//! Corpus-level analysis: scoring whole text collections, implicitness
//! histograms, pragmatic diversity, and joining externally collected
//! detection verdicts per implicitness bin.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::backend::{EmbeddingBackend, EmbeddingTable};
use crate::data::mean_std;
use crate::error::{Error, Result};
use crate::io::read_jsonl_checked;
use crate::model::ProjectionHead;
use crate::training::{rng_for, Stream};

/// Number of implicitness bins.
pub const N_BINS: usize = 8;
/// Width of one bin on the `[0, 2]` score range.
pub const BIN_WIDTH: f64 = 0.25;
/// Default number of sentence pairs drawn by [`pragmatic_diversity`].
pub const DEFAULT_DIVERSITY_SAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCorpus {
    pub items: Vec<ScoredText>,
    pub checkpoint_id: String,
    pub backend_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl ScoredCorpus {
    pub fn scores(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.score).collect()
    }

    pub fn summary(&self) -> Summary {
        let (mean, std) = mean_std(self.items.iter().map(|i| i.score));
        Summary {
            count: self.items.len(),
            mean,
            std,
        }
    }

    /// Keeps the first occurrence of each exact text.
    pub fn dedup(&self) -> ScoredCorpus {
        let mut seen = std::collections::HashSet::new();
        ScoredCorpus {
            items: self
                .items
                .iter()
                .filter(|i| seen.insert(i.text.as_str()))
                .cloned()
                .collect(),
            checkpoint_id: self.checkpoint_id.clone(),
            backend_id: self.backend_id.clone(),
        }
    }
}

/// Scores every text, preserving order. Each distinct text is embedded once.
pub fn score_corpus(
    texts: &[String],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
    checkpoint_id: &str,
) -> Result<ScoredCorpus> {
    let table = EmbeddingTable::build(backend, texts.iter().map(String::as_str))?;
    let items = texts
        .iter()
        .map(|t| {
            let score = head
                .implicitness(table.get(t)?)
                .map_err(|e| Error::InvalidInput(format!("scoring {t:?}: {e}")))?;
            Ok(ScoredText {
                text: t.clone(),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredCorpus {
        items,
        checkpoint_id: checkpoint_id.to_string(),
        backend_id: backend.id(),
    })
}

/// Bin index for a score: `[0, 0.25)`, …, `[1.5, 1.75)`, `[1.75, 2]`.
pub fn bin_index(score: f64) -> Result<usize> {
    if !(0.0..=2.0).contains(&score) {
        return Err(Error::InvalidInput(format!(
            "implicitness score {score} outside [0, 2]; binning needs a cosine-metric head"
        )));
    }
    Ok(((score / BIN_WIDTH) as usize).min(N_BINS - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    /// `N_BINS + 1` edges from 0 to 2.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Flagged fraction per bin; `None` for empty bins or when no verdicts
    /// were joined.
    pub accuracy: Vec<Option<f64>>,
}

impl BinReport {
    pub fn edges() -> Vec<f64> {
        (0..=N_BINS).map(|k| k as f64 * BIN_WIDTH).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Columns `bin, count, accuracy`; `bin` is the interval label and an
    /// absent accuracy is an empty field.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        out.write_record(["bin", "count", "accuracy"])
            .map_err(err)?;
        for k in 0..N_BINS {
            let close = if k == N_BINS - 1 { ']' } else { ')' };
            let label = format!("[{},{}{close}", self.edges[k], self.edges[k + 1]);
            let acc = self.accuracy[k].map(|a| a.to_string()).unwrap_or_default();
            out.write_record([label, self.counts[k].to_string(), acc])
                .map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn bin_by_implicitness(scores: &[f64]) -> Result<BinReport> {
    let mut counts = vec![0; N_BINS];
    for &s in scores {
        counts[bin_index(s)?] += 1;
    }
    Ok(BinReport {
        edges: BinReport::edges(),
        counts,
        accuracy: vec![None; N_BINS],
    })
}

/// Distinct unordered index pairs `(i, j)`, `i < j`, drawn uniformly without
/// replacement; `min(n_samples, C(n, 2))` of them, sorted.
pub fn sample_pairs(n: usize, n_samples: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "pragmatic diversity needs at least 2 texts, got {n}"
        )));
    }
    let total = n * (n - 1) / 2;
    let mut rng = rng_for(seed, Stream::Diversity);
    let picks = sample(&mut rng, total, n_samples.min(total));
    let mut pairs: Vec<(usize, usize)> = picks.into_iter().map(|k| decode_pair(k, n)).collect();
    pairs.sort_unstable();
    Ok(pairs)
}

/// Inverse of the row-major enumeration of the strict upper triangle.
fn decode_pair(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// Pragmatic distances over sampled sentence pairs; see [`sample_pairs`].
pub fn pragmatic_diversity(
    texts: &[String],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<PairDistance>> {
    let pairs = sample_pairs(texts.len(), n_samples, seed)?;
    let table = EmbeddingTable::build(backend, texts.iter().map(String::as_str))?;
    pairs
        .into_iter()
        .map(|(i, j)| {
            let distance = head.pragmatic_distance(table.get(&texts[i])?, table.get(&texts[j])?)?;
            Ok(PairDistance { i, j, distance })
        })
        .collect()
}

/// One externally collected detection verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub text: String,
    pub flagged: bool,
    #[serde(default)]
    pub model: String,
}

pub fn load_verdicts(path: impl AsRef<Path>) -> Result<Vec<Verdict>> {
    read_jsonl_checked(path, |_: &Verdict| None)
}

/// Keys verdicts by exact text. A text listed twice must carry the same
/// `flagged` value.
pub fn verdict_map(verdicts: &[Verdict]) -> Result<HashMap<String, bool>> {
    let mut map = HashMap::with_capacity(verdicts.len());
    for v in verdicts {
        if let Some(prev) = map.insert(v.text.clone(), v.flagged) {
            if prev != v.flagged {
                return Err(Error::InvalidInput(format!(
                    "conflicting verdicts for text {:?}",
                    v.text
                )));
            }
        }
    }
    Ok(map)
}

/// Bins the corpus and reports the flagged fraction per bin.
pub fn verdict_accuracy_by_bin(
    scored: &ScoredCorpus,
    verdicts: &HashMap<String, bool>,
) -> Result<BinReport> {
    let mut counts = vec![0usize; N_BINS];
    let mut flagged = vec![0usize; N_BINS];
    for item in &scored.items {
        let f = *verdicts
            .get(&item.text)
            .ok_or_else(|| Error::InvalidInput(format!("no verdict for text {:?}", item.text)))?;
        let k = bin_index(item.score)?;
        counts[k] += 1;
        flagged[k] += usize::from(f);
    }
    let accuracy = counts
        .iter()
        .zip(&flagged)
        .map(|(&c, &f)| (c > 0).then(|| f as f64 / c as f64))
        .collect();
    Ok(BinReport {
        edges: BinReport::edges(),
        counts,
        accuracy,
    })
}

/// Full output of an analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub checkpoint_id: String,
    pub backend_id: String,
    pub deduplicated: bool,
    pub summary: Summary,
    pub bins: BinReport,
    pub diversity: DiversityReport,
    pub items: Vec<ScoredText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub n_pairs: usize,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub pairs: Vec<PairDistance>,
}

impl DiversityReport {
    pub fn new(pairs: Vec<PairDistance>, seed: u64) -> Self {
        let (mean, std) = mean_std(pairs.iter().map(|p| p.distance));
        Self {
            n_pairs: pairs.len(),
            seed,
            mean,
            std,
            pairs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(items: &[(&str, f64)]) -> ScoredCorpus {
        ScoredCorpus {
            items: items
                .iter()
                .map(|(t, s)| ScoredText {
                    text: t.to_string(),
                    score: *s,
                })
                .collect(),
            checkpoint_id: "c".into(),
            backend_id: "b".into(),
        }
    }

    #[test]
    fn summary_examples() {
        let s = corpus(&[("a", 0.5), ("b", 1.5)]).summary();
        assert_eq!((s.mean, s.std), (1.0, 0.5));
        let s = corpus(&[("a", 0.7)]).summary();
        assert_eq!((s.mean, s.std), (0.7, 0.0));
    }

    #[test]
    fn bin_edges() {
        assert_eq!(
            bin_by_implicitness(&[0.1, 0.26, 1.99]).unwrap().counts,
            vec![1, 1, 0, 0, 0, 0, 0, 1]
        );
        assert_eq!(bin_index(2.0).unwrap(), 7);
        assert_eq!(bin_index(0.25).unwrap(), 1);
        assert_eq!(bin_index(0.0).unwrap(), 0);
        assert_eq!(bin_index(1.75).unwrap(), 7);
        assert_eq!(bin_index(f64::from_bits(1.75f64.to_bits() - 1)).unwrap(), 6);
        assert!(bin_index(2.0000001).is_err());
        assert!(bin_index(-1e-12).is_err());
        assert!(bin_index(f64::NAN).is_err());
    }

    #[test]
    fn decode_enumerates_upper_triangle() {
        let n = 6;
        let mut want = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                want.push((i, j));
            }
        }
        let got: Vec<_> = (0..n * (n - 1) / 2).map(|k| decode_pair(k, n)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn small_corpus_takes_all_pairs() {
        assert_eq!(
            sample_pairs(3, 2000, 0).unwrap(),
            vec![(0, 1), (0, 2), (1, 2)]
        );
        assert!(sample_pairs(1, 10, 0).is_err());
        assert_eq!(
            sample_pairs(50, 100, 9).unwrap(),
            sample_pairs(50, 100, 9).unwrap()
        );
    }

    #[test]
    fn verdict_bins() {
        let c = corpus(&[("a", 0.1), ("b", 0.2), ("c", 0.15), ("d", 1.9)]);
        let v: HashMap<String, bool> = [("a", true), ("b", true), ("c", false), ("d", true)]
            .into_iter()
            .map(|(t, f)| (t.to_string(), f))
            .collect();
        let r = verdict_accuracy_by_bin(&c, &v).unwrap();
        assert!((r.accuracy[0].unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.accuracy[7], Some(1.0));
        assert_eq!((r.counts[3], r.accuracy[3]), (0, None));
        let mut missing = v.clone();
        missing.remove("d");
        assert!(
            matches!(verdict_accuracy_by_bin(&c, &missing), Err(Error::InvalidInput(m)) if m.contains("\"d\""))
        );
    }

    #[test]
    fn conflicting_verdicts_rejected() {
        let v = |f| Verdict {
            text: "x".into(),
            flagged: f,
            model: "m".into(),
        };
        assert!(verdict_map(&[v(true), v(true)]).is_ok());
        assert!(verdict_map(&[v(true), v(false)]).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = bin_by_implicitness(&[2.0]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "bin,count,accuracy");
        assert_eq!(lines[1], "\"[0,0.25)\",0,");
        assert_eq!(lines[8], "\"[1.75,2]\",1,");
    }

    proptest! {
        #[test]
        fn counts_sum_to_input(scores in prop::collection::vec(0.0..=2.0f64, 0..200)) {
            prop_assert_eq!(bin_by_implicitness(&scores).unwrap().total(), scores.len());
        }

        #[test]
        fn sampled_pairs_distinct(n in 2usize..60, k in 1usize..400, seed in any::<u64>()) {
            let pairs = sample_pairs(n, k, seed).unwrap();
            prop_assert_eq!(pairs.len(), k.min(n * (n - 1) / 2));
            prop_assert!(pairs.iter().all(|&(i, j)| i < j && j < n));
            prop_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn verdict_bins_order_invariant(raw in prop::collection::vec((0.0..=2.0f64, any::<bool>()), 1..50)) {
            let items: Vec<(String, f64)> = raw.iter().enumerate().map(|(k, (s, _))| (format!("t{k}"), *s)).collect();
            let v: HashMap<String, bool> = raw.iter().enumerate().map(|(k, (_, f))| (format!("t{k}"), *f)).collect();
            let fwd = corpus(&items.iter().map(|(t, s)| (t.as_str(), *s)).collect::<Vec<_>>());
            let mut rev = fwd.clone();
            rev.items.reverse();
            prop_assert_eq!(verdict_accuracy_by_bin(&fwd, &v).unwrap(), verdict_accuracy_by_bin(&rev, &v).unwrap());
        }
    }
}
