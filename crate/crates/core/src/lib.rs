//! Categorical matrix completion.
//!
//! A real `d₁ × d₂` matrix `M` of low rank is observed only through category
//! draws `Y_ij ~ f(M_ij)` on a random subset of cells. This crate estimates
//! `M` by maximizing the categorical log-likelihood over the convex set
//! `{‖X‖_* ≤ α√(r d₁ d₂), |X_ij| ≤ α}` and provides the supporting pieces:
//! link families and their smoothness constants, divergences, synthetic data,
//! link fitting, evaluation metrics and the closed-form error bounds.

pub mod constraint;
pub mod divergence;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod fitting;
pub mod io;
pub mod linalg;
pub mod links;
pub mod numeric;
pub mod sampling;
pub mod solver;

pub use constraint::ConstraintSpec;
pub use error::{Error, Result};
pub use evaluation::{BoundConstants, BoundReport, RatingReport};
pub use fitting::{fit_logit, FitConfig, LinkFit, TrainingPairs};
pub use links::{LinkFamily, MultinomialLogitFamily, SmoothnessReport, TabularLinkFamily};
pub use sampling::{GroundTruth, Observation, ObservationMask, ObservationSet};
pub use solver::{solve, Estimate, SolverConfig};
