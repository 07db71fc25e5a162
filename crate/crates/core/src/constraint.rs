use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The feasible set `{X : ‖X‖_* ≤ α√(r d₁ d₂), |X_ij| ≤ α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub alpha: f64,
    pub rank: usize,
    pub d1: usize,
    pub d2: usize,
}

impl ConstraintSpec {
    pub fn new(alpha: f64, rank: usize, d1: usize, d2: usize) -> Result<Self> {
        let spec = Self { alpha, rank, d1, d2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        if self.d1 == 0 || self.d2 == 0 {
            return Err(invalid(format!("dimensions must be positive, got {}x{}", self.d1, self.d2)));
        }
        if self.rank == 0 || self.rank > self.d1.min(self.d2) {
            return Err(invalid(format!(
                "rank must lie in 1..=min(d1, d2) = {}, got {}",
                self.d1.min(self.d2),
                self.rank
            )));
        }
        Ok(())
    }

    /// Nuclear-norm radius `α√(r d₁ d₂)`.
    pub fn radius(&self) -> f64 {
        self.alpha * ((self.rank * self.d1 * self.d2) as f64).sqrt()
    }
}
