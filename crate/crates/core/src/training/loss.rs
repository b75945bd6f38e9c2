//! Margin ranking losses.

use serde::{Deserialize, Serialize};

use super::TrainConfig;

/// Scores read off one training instance by a head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    /// Implicitness of the implicit anchor.
    pub i1: f64,
    /// Implicitness of the positive explicit sentence.
    pub i2: f64,
    /// Implicitness of the negative explicit sentence.
    pub i3: f64,
    /// Pragmatic distance anchor ↔ positive.
    pub dp_pos: f64,
    /// Pragmatic distance anchor ↔ negative.
    pub dp_neg: f64,
}

/// `max(0, γ1 − (I_implicit − I_explicit))`
pub fn implicitness_loss(i_implicit: f64, i_explicit: f64, gamma1: f64) -> f64 {
    (gamma1 - (i_implicit - i_explicit)).max(0.0)
}

/// `max(0, γ2 − (ΔP⁻ − ΔP⁺))`
pub fn pragmatic_loss(dp_pos: f64, dp_neg: f64, gamma2: f64) -> f64 {
    (gamma2 - (dp_neg - dp_pos)).max(0.0)
}

/// Both implicitness hinges plus the weighted pragmatic hinge.
pub fn total_loss(s: &InstanceScores, cfg: &TrainConfig) -> f64 {
    implicitness_loss(s.i1, s.i2, cfg.gamma1)
        + implicitness_loss(s.i1, s.i3, cfg.gamma1)
        + cfg.alpha * pragmatic_loss(s.dp_pos, s.dp_neg, cfg.gamma2)
}

/// Partial derivatives of [`total_loss`] with respect to each score. The
/// subgradient at a hinge kink is taken as zero.
pub(crate) fn score_gradients(s: &InstanceScores, cfg: &TrainConfig) -> InstanceScores {
    let active = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
    let a12 = active(cfg.gamma1 - (s.i1 - s.i2));
    let a13 = active(cfg.gamma1 - (s.i1 - s.i3));
    let ap = cfg.alpha * active(cfg.gamma2 - (s.dp_neg - s.dp_pos));
    InstanceScores {
        i1: -(a12 + a13),
        i2: a12,
        i3: a13,
        dp_pos: ap,
        dp_neg: -ap,
    }
}
