//! The categorical log-likelihood `F(X) = Σ_Ω log f_{Y_ij}(X_ij)` and its gradient.

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::links::MultinomialLogitFamily;
use crate::numeric::CompensatedSum;
use crate::sampling::ObservationSet;

use super::Objective;

/// Categorical log-likelihood of a fixed observation set, as an [`Objective`].
///
/// With `prob_floor > 0`, `log f` is clamped below at `ln(prob_floor)`; the
/// clamped term is constant, so its gradient contribution is zero.
#[derive(Debug, Clone, Copy)]
pub struct CategoricalLikelihood<'a> {
    family: &'a MultinomialLogitFamily,
    obs: &'a ObservationSet,
    log_floor: f64,
}

impl<'a> CategoricalLikelihood<'a> {
    pub fn new(
        family: &'a MultinomialLogitFamily,
        obs: &'a ObservationSet,
        prob_floor: f64,
    ) -> Result<Self> {
        if family.k() != obs.k() {
            return Err(invalid(format!(
                "family has K = {} but the observations use {} categories",
                family.k(),
                obs.k()
            )));
        }
        if !(prob_floor >= 0.0 && prob_floor < 1.0) {
            return Err(invalid(format!("prob_floor must lie in [0, 1), got {prob_floor}")));
        }
        let log_floor = if prob_floor > 0.0 {
            prob_floor.ln()
        } else {
            f64::NEG_INFINITY
        };
        Ok(Self {
            family,
            obs,
            log_floor,
        })
    }

    fn check_dims(&self, x: &Array2<f64>) -> Result<()> {
        if x.dim() != self.obs.dims() {
            return Err(invalid(format!(
                "matrix is {:?} but the observations are {}x{}",
                x.dim(),
                self.obs.d1(),
                self.obs.d2()
            )));
        }
        Ok(())
    }
}

impl Objective for CategoricalLikelihood<'_> {
    fn value(&self, x: &Array2<f64>) -> f64 {
        let mut sum = CompensatedSum::new();
        for o in self.obs.entries() {
            let lp = self.family.log_prob(o.category, x[[o.row, o.col]]);
            sum.add(lp.max(self.log_floor));
        }
        sum.value()
    }

    fn gradient(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(x.dim());
        for o in self.obs.entries() {
            let (lp, score) = self.family.log_prob_and_score(o.category, x[[o.row, o.col]]);
            if lp > self.log_floor {
                g[[o.row, o.col]] += score;
            }
        }
        g
    }
}

/// `F(X)` with probabilities clamped below at `prob_floor` (0 disables the clamp).
pub fn log_likelihood_with_floor(
    family: &MultinomialLogitFamily,
    obs: &ObservationSet,
    x: &Array2<f64>,
    prob_floor: f64,
) -> Result<f64> {
    let objective = CategoricalLikelihood::new(family, obs, prob_floor)?;
    objective.check_dims(x)?;
    Ok(objective.value(x))
}

/// `F(X)` evaluated exactly in log space.
pub fn log_likelihood(
    family: &MultinomialLogitFamily,
    obs: &ObservationSet,
    x: &Array2<f64>,
) -> Result<f64> {
    log_likelihood_with_floor(family, obs, x, 0.0)
}

/// `∇F(X)`: `f_k'(X_ij)/f_k(X_ij)` summed over observations at `(i, j)`, zero elsewhere.
pub fn log_likelihood_grad(
    family: &MultinomialLogitFamily,
    obs: &ObservationSet,
    x: &Array2<f64>,
) -> Result<Array2<f64>> {
    let objective = CategoricalLikelihood::new(family, obs, 0.0)?;
    objective.check_dims(x)?;
    Ok(objective.gradient(x))
}
