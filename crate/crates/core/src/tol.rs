use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Span equality, Hermiticity and unitarity checks.
    pub num: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_rel: f64,
    /// Absolute floor for rank decisions.
    pub rank_abs: f64,
    /// Relative half-width of the zero band used to classify eigenvalues.
    pub zero_rel: f64,
    /// Smallest admissible Gram eigenvalue.
    pub pd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            num: 1e-9,
            rank_rel: 1e-8,
            rank_abs: 1e-12,
            zero_rel: 1e-8,
            pd: 1e-12,
        }
    }
}

impl Tolerances {
    /// Singular-value cutoff for a matrix whose largest singular value is `smax`.
    pub fn rank_cutoff(&self, smax: f64) -> f64 {
        (self.rank_rel * smax).max(self.rank_abs)
    }

    /// Half-width of the zero band for an operator of norm `scale`.
    pub fn zero_band(&self, scale: f64) -> f64 {
        (self.zero_rel * scale).max(self.rank_abs)
    }
}
