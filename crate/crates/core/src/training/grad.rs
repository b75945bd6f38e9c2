//! Analytic gradients of the summed batch loss with respect to every weight
//! matrix of a [`ProjectionHead`].
//!
//! The chain is: embedding → (`W_p`, `W_s`) → features → (`W_t` or
//! `W_t1`/`W_t2`) → compared pair → metric → hinge. Gradients are
//! accumulated instance by instance in batch order, so the result is
//! bitwise reproducible.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, COSINE_EPS};
use crate::model::{Embedding, Metric, ProjectionHead, Transform, TransformWeights};

use super::loss::{score_gradients, total_loss, InstanceScores};
use super::TrainConfig;

/// Borrowed embeddings of one training instance.
#[derive(Debug, Clone, Copy)]
pub struct Triplet<'a> {
    pub implicit: &'a Embedding,
    pub explicit_pos: &'a Embedding,
    pub explicit_neg: &'a Embedding,
}

/// One gradient matrix per head matrix, in [`ProjectionHead::matrices`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    matrices: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(head: &ProjectionHead) -> Self {
        Self {
            matrices: head
                .matrices()
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    pub fn is_zero(&self) -> bool {
        self.matrices
            .iter()
            .all(|m| m.as_slice().iter().all(|x| *x == 0.0))
    }
}

/// Summed loss of a batch and its gradients.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: f64,
    pub gradients: Gradients,
}

struct Forward {
    hp: Vec<f64>,
    hs: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    score: f64,
}

fn forward(head: &ProjectionHead, e: &Embedding) -> Result<Forward> {
    let d = head.config().d;
    if e.dim() != d {
        return Err(Error::dim(d, e.dim()));
    }
    let hp = head.pragmatic_projection().left_mul(e.values())?;
    let hs = head.semantic_projection().left_mul(e.values())?;
    let (a, b) = match (head.transform_weights(), head.config().transform) {
        (TransformWeights::Single(wt), Transform::PToS) => (wt.left_mul(&hp)?, hs.clone()),
        (TransformWeights::Single(wt), Transform::SToP) => (wt.left_mul(&hs)?, hp.clone()),
        (
            TransformWeights::Pair {
                pragmatic,
                semantic,
            },
            Transform::ThirdSpace,
        ) => (pragmatic.left_mul(&hp)?, semantic.left_mul(&hs)?),
        _ => {
            return Err(Error::Config(
                "transform weights do not match the configured transform".into(),
            ))
        }
    };
    let score = head.config().imp_metric.distance(&a, &b)?;
    Ok(Forward {
        hp,
        hs,
        a,
        b,
        score,
    })
}

/// Distance under `metric` together with its partial derivatives in `u` and `v`.
///
/// Where the distance is not differentiable (a zero-norm input for cosine,
/// coincident points for Euclidean, or an active clamp) the gradient is zero.
pub(crate) fn metric_with_grad(metric: Metric, u: &[f64], v: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = u.len();
    match metric {
        Metric::Cosine => {
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nu == 0.0 || nv == 0.0 {
                return (1.0, vec![0.0; n], vec![0.0; n]);
            }
            let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let guarded = nu * nv < COSINE_EPS;
            let denom = (nu * nv).max(COSINE_EPS);
            let raw = uv / denom;
            if !(-1.0..=1.0).contains(&raw) {
                return (1.0 - raw.clamp(-1.0, 1.0), vec![0.0; n], vec![0.0; n]);
            }
            // distance = 1 − cos, so the gradient is −∂cos
            let (gu, gv) = if guarded {
                (
                    v.iter().map(|x| -x / denom).collect(),
                    u.iter().map(|x| -x / denom).collect(),
                )
            } else {
                (
                    u.iter()
                        .zip(v)
                        .map(|(ui, vi)| -(vi / denom - raw * ui / (nu * nu)))
                        .collect(),
                    u.iter()
                        .zip(v)
                        .map(|(ui, vi)| -(ui / denom - raw * vi / (nv * nv)))
                        .collect(),
                )
            };
            (1.0 - raw, gu, gv)
        }
        Metric::Euclidean => {
            let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
            let dist = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            if dist == 0.0 {
                return (0.0, vec![0.0; n], vec![0.0; n]);
            }
            let gu: Vec<f64> = diff.iter().map(|x| x / dist).collect();
            let gv = gu.iter().map(|x| -x).collect();
            (dist, gu, gv)
        }
    }
}

fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    for (a, xi) in acc.iter_mut().zip(x) {
        *a += scale * xi;
    }
}

/// Pushes `∂L/∂I` for one sentence back to its features, accumulating the
/// transform-matrix gradients into `grads` on the way.
fn backprop_score(
    head: &ProjectionHead,
    fwd: &Forward,
    g_score: f64,
    ghp: &mut [f64],
    ghs: &mut [f64],
    grads: &mut [Matrix],
) {
    if g_score == 0.0 {
        return;
    }
    let (_, da, db) = metric_with_grad(head.config().imp_metric, &fwd.a, &fwd.b);
    let ga: Vec<f64> = da.iter().map(|x| g_score * x).collect();
    let gb: Vec<f64> = db.iter().map(|x| g_score * x).collect();
    match (head.transform_weights(), head.config().transform) {
        (TransformWeights::Single(wt), Transform::PToS) => {
            grads[2].add_outer(&fwd.hp, &ga);
            axpy(ghp, 1.0, &wt.mul_transposed(&ga));
            axpy(ghs, 1.0, &gb);
        }
        (TransformWeights::Single(wt), Transform::SToP) => {
            grads[2].add_outer(&fwd.hs, &ga);
            axpy(ghs, 1.0, &wt.mul_transposed(&ga));
            axpy(ghp, 1.0, &gb);
        }
        (
            TransformWeights::Pair {
                pragmatic,
                semantic,
            },
            Transform::ThirdSpace,
        ) => {
            grads[2].add_outer(&fwd.hp, &ga);
            axpy(ghp, 1.0, &pragmatic.mul_transposed(&ga));
            grads[3].add_outer(&fwd.hs, &gb);
            axpy(ghs, 1.0, &semantic.mul_transposed(&gb));
        }
        // forward() already rejected mismatched heads
        _ => unreachable!("transform weights validated in forward"),
    }
}

/// Scores of one instance under `head`.
pub fn instance_scores(head: &ProjectionHead, t: &Triplet<'_>) -> Result<InstanceScores> {
    let f1 = forward(head, t.implicit)?;
    let f2 = forward(head, t.explicit_pos)?;
    let f3 = forward(head, t.explicit_neg)?;
    let prag = head.config().prag_metric;
    Ok(InstanceScores {
        i1: f1.score,
        i2: f2.score,
        i3: f3.score,
        dp_pos: prag.distance(&f1.hp, &f2.hp)?,
        dp_neg: prag.distance(&f1.hp, &f3.hp)?,
    })
}

/// Summed loss over `batch` and its gradient with respect to every head matrix.
pub fn loss_gradients(
    batch: &[Triplet<'_>],
    head: &ProjectionHead,
    cfg: &TrainConfig,
) -> Result<BatchGradients> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("gradient batch is empty".into()));
    }
    let l = head.config().l;
    let prag = head.config().prag_metric;
    let mut grads = Gradients::zeros_like(head);
    let mut loss = 0.0;

    for t in batch {
        let fwd = [
            forward(head, t.implicit)?,
            forward(head, t.explicit_pos)?,
            forward(head, t.explicit_neg)?,
        ];
        let (dp_pos, g1_pos, g2) = metric_with_grad(prag, &fwd[0].hp, &fwd[1].hp);
        let (dp_neg, g1_neg, g3) = metric_with_grad(prag, &fwd[0].hp, &fwd[2].hp);
        let scores = InstanceScores {
            i1: fwd[0].score,
            i2: fwd[1].score,
            i3: fwd[2].score,
            dp_pos,
            dp_neg,
        };
        loss += total_loss(&scores, cfg);

        let gs = score_gradients(&scores, cfg);
        let embeddings = [t.implicit, t.explicit_pos, t.explicit_neg];
        let g_scores = [gs.i1, gs.i2, gs.i3];
        for (k, (f, e)) in fwd.iter().zip(embeddings).enumerate() {
            let mut ghp = vec![0.0; l];
            let mut ghs = vec![0.0; l];
            // pragmatic-distance terms reach only h_p
            if gs.dp_pos != 0.0 {
                match k {
                    0 => axpy(&mut ghp, gs.dp_pos, &g1_pos),
                    1 => axpy(&mut ghp, gs.dp_pos, &g2),
                    _ => {}
                }
            }
            if gs.dp_neg != 0.0 {
                match k {
                    0 => axpy(&mut ghp, gs.dp_neg, &g1_neg),
                    2 => axpy(&mut ghp, gs.dp_neg, &g3),
                    _ => {}
                }
            }
            backprop_score(
                head,
                f,
                g_scores[k],
                &mut ghp,
                &mut ghs,
                &mut grads.matrices,
            );
            grads.matrices[0].add_outer(e.values(), &ghp);
            grads.matrices[1].add_outer(e.values(), &ghs);
        }
    }
    Ok(BatchGradients {
        loss,
        gradients: grads,
    })
}
