//! The tolerance record threaded through every numerical decision.

use serde::{Deserialize, Serialize};

/// One place for every cutoff the library uses.
///
/// `abs` is scaled by the norm of whatever is being compared; the other
/// fields are relative cutoffs for discrete decisions (ranks, supports).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute comparison tolerance, scaled by the element norm.
    pub abs: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub rank: f64,
    /// Pseudo-inverse support cutoff relative to the largest eigenvalue.
    pub support: f64,
    /// Mass outside the support above which a pencil has no finite solution.
    pub range: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rank: 1e-8,
            support: 1e-10,
            range: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn with_abs(abs: f64) -> Self {
        Self { abs, ..Self::default() }
    }

    /// `abs * max(1, scale)`.
    pub fn scaled(&self, scale: f64) -> f64 {
        self.abs * scale.max(1.0)
    }
}

/// Integer part `[K]` of a numerically computed constant.
///
/// Values within `1e-6` below an integer are rounded up to it, so that a
/// certificate of `2 - 1e-13` is read as `[K] = 2`.
pub fn integer_part(k: f64) -> f64 {
    if k.is_infinite() {
        return f64::INFINITY;
    }
    (k + 1e-6).floor()
}
