//! Constrained maximum-likelihood estimation by projected gradient ascent.

mod likelihood;
mod projection;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSpec;
use crate::error::{invalid, Result};
use crate::linalg::{frobenius_norm, max_abs, nuclear_norm};
use crate::links::LinkFamily;
use crate::sampling::ObservationSet;

pub use likelihood::{
    log_likelihood, log_likelihood_grad, log_likelihood_with_floor, CategoricalLikelihood,
};
pub use projection::{
    project_box, project_constraint_set, project_constraint_set_warm, project_l1_ball_nonneg,
    project_nuclear_ball, ConstraintProjection, DykstraDuals,
};

/// Tuning knobs for [`solve`]. Every field is optional in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖X⁺ − X‖_F / t` falls to this value.
    pub grad_tol: f64,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub dykstra_max: usize,
    pub dykstra_tol: f64,
    /// Lower clamp on probabilities inside the log; 0 evaluates `log f` exactly.
    pub prob_floor: f64,
    /// Halvings allowed per iteration before the line search gives up.
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-5,
            step_init: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            dykstra_max: 200,
            dykstra_tol: 1e-9,
            prob_floor: 0.0,
            max_backtracks: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        if self.max_iters == 0 || self.dykstra_max == 0 || self.max_backtracks == 0 {
            return Err(invalid("max_iters, dykstra_max and max_backtracks must be positive"));
        }
        positive("grad_tol", self.grad_tol)?;
        positive("step_init", self.step_init)?;
        positive("dykstra_tol", self.dykstra_tol)?;
        unit("backtrack_factor", self.backtrack_factor)?;
        unit("armijo_c", self.armijo_c)?;
        if !(self.prob_floor >= 0.0 && self.prob_floor < 1.0) {
            return Err(invalid(format!(
                "prob_floor must lie in [0, 1), got {}",
                self.prob_floor
            )));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Why the ascent loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    LineSearchFailed,
}

/// Output of [`solve`] (or any [`maximize`] run).
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    #[serde(skip)]
    pub x: Array2<f64>,
    pub iters: usize,
    /// Objective value at `x`; the log-likelihood for [`solve`].
    pub final_ll: f64,
    pub nuclear_residual: f64,
    pub box_residual: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Projections in which Dykstra hit its sweep limit.
    pub projection_warnings: usize,
    /// Dykstra sweeps summed over every projection, including rejected trials.
    pub dykstra_sweeps: usize,
    /// Objective evaluations, including rejected trials.
    pub evaluations: usize,
    /// Objective value at `X₀` followed by one value per accepted iteration.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl Estimate {
    pub fn has_warning(&self) -> bool {
        !self.converged || self.projection_warnings > 0
    }
}

/// A smooth concave function of a matrix, maximized by [`maximize`].
pub trait Objective {
    fn value(&self, x: &Array2<f64>) -> f64;
    fn gradient(&self, x: &Array2<f64>) -> Array2<f64>;
}

/// Projected gradient ascent over the constraint set from `X₀ = 0`.
///
/// Each iteration tries `X⁺ = Π_S(X + t∇F(X))` and shrinks `t` until
/// `F(X⁺) ≥ F(X) + c⟨∇F(X), X⁺ − X⟩` and `F(X⁺) ≥ F(X)`. The accepted step
/// carries over to the next iteration, so `t` never grows.
pub fn maximize<O: Objective>(
    objective: &O,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    spec.validate()?;
    cfg.validate()?;
    let mut x = Array2::<f64>::zeros((spec.d1, spec.d2));
    let mut f = objective.value(&x);
    if !f.is_finite() {
        return Err(crate::error::Error::Numeric(format!(
            "objective is not finite at the starting point: {f}"
        )));
    }
    let mut trace = vec![f];
    let mut t = cfg.step_init;
    let mut iters = 0;
    let mut projection_warnings = 0;
    let mut dykstra_sweeps = 0;
    let mut evaluations = 1;
    let mut stop_reason = StopReason::MaxIters;
    let mut duals = None;

    'outer: while iters < cfg.max_iters {
        let g = objective.gradient(&x);
        let mut backtracks = 0;
        loop {
            let trial = &x + &(&g * t);
            let proj = project_constraint_set_warm(&trial, spec, cfg, &mut duals)?;
            dykstra_sweeps += proj.sweeps;
            let step = &proj.matrix - &x;
            let displacement = frobenius_norm(&step);
            if displacement / t <= cfg.grad_tol {
                stop_reason = StopReason::Converged;
                break 'outer;
            }
            let fp = objective.value(&proj.matrix);
            evaluations += 1;
            let predicted = (&g * &step).sum();
            if fp.is_finite() && fp >= f && fp >= f + cfg.armijo_c * predicted {
                if !proj.converged {
                    projection_warnings += 1;
                }
                x = proj.matrix;
                f = fp;
                trace.push(f);
                iters += 1;
                break;
            }
            backtracks += 1;
            if backtracks >= cfg.max_backtracks {
                stop_reason = StopReason::LineSearchFailed;
                break 'outer;
            }
            t *= cfg.backtrack_factor;
        }
    }
    if stop_reason != StopReason::Converged {
        log::warn!("solver stopped without converging: {stop_reason:?} after {iters} iterations");
    }

    let radius = spec.radius();
    Ok(Estimate {
        nuclear_residual: (nuclear_norm(&x)? - radius).max(0.0),
        box_residual: (max_abs(&x) - spec.alpha).max(0.0),
        final_ll: f,
        iters,
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        projection_warnings,
        dykstra_sweeps,
        evaluations,
        trace,
        x,
    })
}

/// Maximizes the categorical log-likelihood of `obs` over the constraint set.
///
/// A family whose slopes are all equal makes the likelihood constant in `X`;
/// the solver then stops at `X₀ = 0`.
pub fn solve(
    family: &LinkFamily,
    obs: &ObservationSet,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    let logit = family.require_logit()?;
    if obs.is_empty() {
        return Err(invalid("observation set is empty"));
    }
    if obs.dims() != (spec.d1, spec.d2) {
        return Err(invalid(format!(
            "observations are {}x{} but the constraint set is {}x{}",
            obs.d1(),
            obs.d2(),
            spec.d1,
            spec.d2
        )));
    }
    let objective = CategoricalLikelihood::new(logit, obs, cfg.prob_floor)?;
    maximize(&objective, spec, cfg)
}
