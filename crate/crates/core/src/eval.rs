//! Measurement suite: implicitness and pragmatics accuracy over training
//! instances, Kendall's τ and Spearman's ρ between rankings, and the ranking
//! and choice task runners.
//!
//! Both accuracies use strict inequalities, so ties count as failures.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{EmbeddingBackend, EmbeddingTable};
use crate::data::{mean_std, TrainingInstance};
use crate::error::{Error, Result};
use crate::io::read_jsonl_checked;
use crate::model::ProjectionHead;
use crate::training::{instance_scores, InstanceScores, Triplet};

/// Each instance contributes two comparisons, anchor vs. positive and anchor
/// vs. negative explicit; a comparison is correct iff the anchor scores
/// strictly higher.
pub fn implicitness_accuracy_from_scores(scores: &[InstanceScores]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput(
            "implicitness accuracy of an empty set is undefined".into(),
        ));
    }
    let correct: usize = scores
        .iter()
        .map(|s| usize::from(s.i1 > s.i2) + usize::from(s.i1 > s.i3))
        .sum();
    Ok(correct as f64 / (2 * scores.len()) as f64)
}

/// Fraction of instances with `ΔP⁺ < ΔP⁻` strictly.
pub fn pragmatics_accuracy_from_scores(scores: &[InstanceScores]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput(
            "pragmatics accuracy of an empty set is undefined".into(),
        ));
    }
    let correct = scores.iter().filter(|s| s.dp_pos < s.dp_neg).count();
    Ok(correct as f64 / scores.len() as f64)
}

/// Scores every instance, embedding each distinct sentence once.
pub fn score_instances(
    instances: &[TrainingInstance],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<InstanceScores>> {
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
    instances
        .iter()
        .map(|i| {
            let t = Triplet {
                implicit: table.get(&i.implicit)?,
                explicit_pos: table.get(&i.explicit_pos)?,
                explicit_neg: table.get(&i.explicit_neg)?,
            };
            instance_scores(head, &t)
        })
        .collect()
}

pub fn implicitness_accuracy(
    instances: &[TrainingInstance],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::InvalidInput(
            "implicitness accuracy of an empty set is undefined".into(),
        ));
    }
    implicitness_accuracy_from_scores(&score_instances(instances, head, backend)?)
}

pub fn pragmatics_accuracy(
    instances: &[TrainingInstance],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::InvalidInput(
            "pragmatics accuracy of an empty set is undefined".into(),
        ));
    }
    pragmatics_accuracy_from_scores(&score_instances(instances, head, backend)?)
}

/// Accuracies plus the mean scores and distances on an instance set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n_instances: usize,
    pub implicitness_accuracy: f64,
    pub pragmatics_accuracy: f64,
    /// Mean implicitness of anchors.
    pub mean_implicit_score: f64,
    pub std_implicit_score: f64,
    /// Mean implicitness over positive and negative explicit sentences.
    pub mean_explicit_score: f64,
    pub std_explicit_score: f64,
    pub mean_dp_pos: f64,
    pub std_dp_pos: f64,
    pub mean_dp_neg: f64,
    pub std_dp_neg: f64,
}

impl AccuracyReport {
    pub fn from_scores(scores: &[InstanceScores]) -> Result<Self> {
        let (mean_implicit_score, std_implicit_score) = mean_std(scores.iter().map(|s| s.i1));
        let (mean_explicit_score, std_explicit_score) =
            mean_std(scores.iter().flat_map(|s| [s.i2, s.i3]));
        let (mean_dp_pos, std_dp_pos) = mean_std(scores.iter().map(|s| s.dp_pos));
        let (mean_dp_neg, std_dp_neg) = mean_std(scores.iter().map(|s| s.dp_neg));
        Ok(Self {
            n_instances: scores.len(),
            implicitness_accuracy: implicitness_accuracy_from_scores(scores)?,
            pragmatics_accuracy: pragmatics_accuracy_from_scores(scores)?,
            mean_implicit_score,
            std_implicit_score,
            mean_explicit_score,
            std_explicit_score,
            mean_dp_pos,
            std_dp_pos,
            mean_dp_neg,
            std_dp_neg,
        })
    }
}

pub fn evaluate_instances(
    instances: &[TrainingInstance],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
) -> Result<AccuracyReport> {
    if instances.is_empty() {
        return Err(Error::InvalidInput(
            "cannot evaluate an empty instance set".into(),
        ));
    }
    AccuracyReport::from_scores(&score_instances(instances, head, backend)?)
}

fn check_rank_inputs(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dim(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "rank correlation needs at least 2 items, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("ranks must be finite".into()));
    }
    Ok(())
}

/// Kendall's τ-a: `(concordant − discordant) / C(n, 2)`. Pairs tied in
/// either ranking count as neither.
pub fn kendall_tau(rank_a: &[f64], rank_b: &[f64]) -> Result<f64> {
    check_rank_inputs(rank_a, rank_b)?;
    let n = rank_a.len();
    let mut net: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s = (rank_a[i] - rank_a[j]) * (rank_b[i] - rank_b[j]);
            if s > 0.0 {
                net += 1;
            } else if s < 0.0 {
                net -= 1;
            }
        }
    }
    Ok(net as f64 / (n * (n - 1) / 2) as f64)
}

/// Ranks `1..=n` with tied values sharing the mean of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ. Inputs are re-ranked first; without ties this is
/// `1 − 6Σd² / (n(n² − 1))`, with ties the Pearson correlation of the
/// fractional ranks.
pub fn spearman_rho(rank_a: &[f64], rank_b: &[f64]) -> Result<f64> {
    check_rank_inputs(rank_a, rank_b)?;
    let ra = fractional_ranks(rank_a);
    let rb = fractional_ranks(rank_b);
    let has_ties = |r: &[f64]| {
        r.iter().any(|x| x.fract() != 0.0) || {
            let mut s = r.to_vec();
            s.sort_by(f64::total_cmp);
            s.windows(2).any(|w| w[0] == w[1])
        }
    };
    let n = ra.len() as f64;
    if !has_ties(&ra) && !has_ties(&rb) {
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)));
    }
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| (x - mean) * (y - mean))
        .sum();
    let va: f64 = ra.iter().map(|x| (x - mean) * (x - mean)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mean) * (y - mean)).sum();
    if va == 0.0 || vb == 0.0 {
        // a constant ranking has no defined correlation
        return Ok(0.0);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Four sentences on one topic with their gold implicitness ranks
/// (1 = most explicit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingQuestion {
    pub group_id: String,
    pub sentences: Vec<String>,
    pub gold_rank: Vec<u32>,
}

impl RankingQuestion {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.sentences.len() != 4 {
            return Err(format!(
                "expected 4 sentences, got {}",
                self.sentences.len()
            ));
        }
        let mut sorted = self.gold_rank.clone();
        sorted.sort_unstable();
        if sorted != [1, 2, 3, 4] {
            return Err(format!(
                "gold_rank {:?} is not a permutation of 1..4",
                self.gold_rank
            ));
        }
        Ok(())
    }
}

/// A reference sentence and three options, one of which is pragmatically
/// closest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceQuestion {
    pub reference: String,
    pub options: Vec<String>,
    pub gold_index: usize,
}

impl ChoiceQuestion {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.options.len() != 3 {
            return Err(format!("expected 3 options, got {}", self.options.len()));
        }
        if self.gold_index > 2 {
            return Err(format!("gold_index {} out of range 0..=2", self.gold_index));
        }
        Ok(())
    }
}

pub fn load_ranking_questions(path: impl AsRef<Path>) -> Result<Vec<RankingQuestion>> {
    read_jsonl_checked(path, |q: &RankingQuestion| q.validate().err())
}

pub fn load_choice_questions(path: impl AsRef<Path>) -> Result<Vec<ChoiceQuestion>> {
    read_jsonl_checked(path, |q: &ChoiceQuestion| q.validate().err())
}

/// Ranks ascending by score (rank 1 = lowest score); ties keep input order.
pub fn rank_by_score(scores: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so equal scores stay in input order
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as u32 + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub group_id: String,
    pub scores: Vec<f64>,
    pub predicted_rank: Vec<u32>,
    pub gold_rank: Vec<u32>,
    pub tau: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub questions: Vec<RankingResult>,
    pub mean_tau: f64,
    pub mean_rho: f64,
}

fn as_f64(r: &[u32]) -> Vec<f64> {
    r.iter().map(|&x| f64::from(x)).collect()
}

pub fn run_ranking_task(
    questions: &[RankingQuestion],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
) -> Result<RankingReport> {
    for q in questions {
        q.validate()
            .map_err(|m| Error::InvalidInput(format!("ranking question {:?}: {m}", q.group_id)))?;
    }
    let table = EmbeddingTable::build(
        backend,
        questions
            .iter()
            .flat_map(|q| q.sentences.iter().map(String::as_str)),
    )?;
    let mut results = Vec::with_capacity(questions.len());
    for q in questions {
        let scores = q
            .sentences
            .iter()
            .map(|s| head.implicitness(table.get(s)?))
            .collect::<Result<Vec<_>>>()?;
        let predicted_rank = rank_by_score(&scores);
        let (p, g) = (as_f64(&predicted_rank), as_f64(&q.gold_rank));
        results.push(RankingResult {
            group_id: q.group_id.clone(),
            tau: kendall_tau(&p, &g)?,
            rho: spearman_rho(&p, &g)?,
            scores,
            predicted_rank,
            gold_rank: q.gold_rank.clone(),
        });
    }
    let n = results.len().max(1) as f64;
    Ok(RankingReport {
        mean_tau: results.iter().map(|r| r.tau).sum::<f64>() / n,
        mean_rho: results.iter().map(|r| r.rho).sum::<f64>() / n,
        questions: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceResult {
    pub reference: String,
    pub distances: Vec<f64>,
    pub chosen: usize,
    pub gold_index: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceReport {
    pub questions: Vec<ChoiceResult>,
    pub accuracy: f64,
}

/// Index of the smallest value; the lowest index wins ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn run_choice_task(
    questions: &[ChoiceQuestion],
    head: &ProjectionHead,
    backend: &dyn EmbeddingBackend,
) -> Result<ChoiceReport> {
    for (k, q) in questions.iter().enumerate() {
        q.validate()
            .map_err(|m| Error::InvalidInput(format!("choice question {k}: {m}")))?;
    }
    let table = EmbeddingTable::build(
        backend,
        questions.iter().flat_map(|q| {
            std::iter::once(q.reference.as_str()).chain(q.options.iter().map(String::as_str))
        }),
    )?;
    let mut results = Vec::with_capacity(questions.len());
    for q in questions {
        let reference = table.get(&q.reference)?;
        let distances = q
            .options
            .iter()
            .map(|o| head.pragmatic_distance(reference, table.get(o)?))
            .collect::<Result<Vec<_>>>()?;
        let chosen = argmin(&distances).expect("three options");
        results.push(ChoiceResult {
            reference: q.reference.clone(),
            distances,
            chosen,
            gold_index: q.gold_index,
            correct: chosen == q.gold_index,
        });
    }
    let accuracy = if results.is_empty() {
        0.0
    } else {
        results.iter().filter(|r| r.correct).count() as f64 / results.len() as f64
    };
    Ok(ChoiceReport {
        questions: results,
        accuracy,
    })
}

/// Everything the harness can report; absent sections were not run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice: Option<ChoiceReport>,
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

impl RankingReport {
    /// One row per question: `group_id, scores, predicted_rank, gold_rank, tau, rho`
    /// (list columns space-separated).
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        out.write_record([
            "group_id",
            "scores",
            "predicted_rank",
            "gold_rank",
            "tau",
            "rho",
        ])
        .map_err(err)?;
        for q in &self.questions {
            out.write_record([
                q.group_id.clone(),
                join(&q.scores),
                join(&q.predicted_rank),
                join(&q.gold_rank),
                q.tau.to_string(),
                q.rho.to_string(),
            ])
            .map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl ChoiceReport {
    /// One row per question: `reference, d0, d1, d2, chosen, gold_index, correct`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        out.write_record([
            "reference",
            "d0",
            "d1",
            "d2",
            "chosen",
            "gold_index",
            "correct",
        ])
        .map_err(err)?;
        for q in &self.questions {
            let mut row = vec![q.reference.clone()];
            row.extend(q.distances.iter().map(f64::to_string));
            row.extend([
                q.chosen.to_string(),
                q.gold_index.to_string(),
                q.correct.to_string(),
            ]);
            out.write_record(&row).map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }
}
