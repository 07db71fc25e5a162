//! Monte-Carlo error sweeps over the sample size and the MovieLens
//! fit / solve / test protocol.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSpec;
use crate::error::{invalid, Result};
use crate::evaluation::{
    baseline_real_completion, bound_report, mse_per_entry, predict_categories, rating_report,
    round_to_labels, BoundConstants, RatingReport,
};
use crate::fitting::{fit_logit, FitConfig, LinkFit, TrainingPairs};
use crate::io::{ratings_to_observations, Rating};
use crate::links::{smoothness_constants, LinkFamily, MultinomialLogitFamily};
use crate::numeric::{median, ols_fit};
use crate::sampling::{default_labels, derive_seed, rng_from_seed, sample_mask, sample_observations, synth_low_rank};
use crate::solver::{solve, SolverConfig};

/// Settings for [`run_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub k: usize,
    pub alpha: f64,
    /// Expected observation counts.
    pub m_grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub constants: BoundConstants,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: f64,
    pub replicate: usize,
    pub mse: f64,
    pub bound_upper: f64,
    pub bound_lower: f64,
    pub observed: usize,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// `(m, median MSE over replicates)`.
    pub medians: Vec<(f64, f64)>,
    /// Least-squares slope of `log median MSE` against `log m`.
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// For each replicate, draws one ground truth and, for every `m` in the grid,
/// a fresh mask and responses; records the per-entry MSE of the estimate
/// next to the upper and lower bounds at that `m`.
pub fn run_sweep(family: &MultinomialLogitFamily, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.replicates < 3 {
        return Err(invalid(format!(
            "at least 3 replicates are required, got {}",
            cfg.replicates
        )));
    }
    if cfg.m_grid.len() < 2 {
        return Err(invalid("the m grid needs at least 2 values"));
    }
    if family.k() != cfg.k {
        return Err(invalid(format!("family has K = {} but the sweep uses K = {}", family.k(), cfg.k)));
    }
    let spec = ConstraintSpec::new(cfg.alpha, cfg.rank, cfg.d1, cfg.d2)?;
    for &m in &cfg.m_grid {
        if !(m >= 1.0 && m <= (cfg.d1 * cfg.d2) as f64) {
            return Err(invalid(format!(
                "m = {m} must lie in [1, {}] for a {}x{} matrix",
                cfg.d1 * cfg.d2,
                cfg.d1,
                cfg.d2
            )));
        }
    }
    cfg.solver.validate()?;
    let smooth = smoothness_constants(family, cfg.alpha, cfg.grid_size)?;
    let link = LinkFamily::from(family.clone());
    let labels = default_labels(cfg.k);

    let mut rows = Vec::new();
    for replicate in 0..cfg.replicates {
        let rep_seed = derive_seed(cfg.seed, replicate as u64);
        let truth = synth_low_rank(cfg.d1, cfg.d2, cfg.rank, cfg.alpha, derive_seed(rep_seed, 0))?;
        for (idx, &m) in cfg.m_grid.iter().enumerate() {
            let mask = sample_mask(cfg.d1, cfg.d2, m, derive_seed(rep_seed, 1000 + idx as u64))?;
            if mask.is_empty() {
                return Err(invalid(format!("replicate {replicate} drew an empty mask at m = {m}")));
            }
            let obs = sample_observations(&link, &truth, &mask, &labels, derive_seed(rep_seed, 2000 + idx as u64))?;
            let est = solve(&link, &obs, &spec, &cfg.solver)?;
            let bounds = bound_report(&smooth, &spec, m.round().max(1.0) as usize, cfg.k, cfg.constants)?;
            log::info!(
                "sweep replicate {replicate} m {m}: {} iterations, converged {}",
                est.iters,
                est.converged
            );
            rows.push(SweepRow {
                m,
                replicate,
                mse: mse_per_entry(&truth.m, &est.x)?,
                bound_upper: bounds.upper_simple,
                bound_lower: bounds.lower,
                observed: obs.len(),
                iters: est.iters,
                converged: est.converged,
            });
        }
    }
    rows.sort_by(|a, b| a.m.total_cmp(&b.m).then(a.replicate.cmp(&b.replicate)));
    let summary = summarize_sweep(&rows)?;
    Ok(SweepResult { rows, summary })
}

/// Median MSE per `m` and the log-log slope through the medians.
pub fn summarize_sweep(rows: &[SweepRow]) -> Result<SweepSummary> {
    let mut ms: Vec<f64> = rows.iter().map(|r| r.m).collect();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    if ms.len() < 2 {
        return Err(invalid("a slope needs at least 2 distinct m values"));
    }
    let medians: Vec<(f64, f64)> = ms
        .iter()
        .map(|&m| {
            let v: Vec<f64> = rows.iter().filter(|r| r.m == m).map(|r| r.mse).collect();
            (m, median(&v))
        })
        .collect();
    if medians.iter().any(|&(_, v)| !(v > 0.0)) {
        return Err(invalid("median MSE must be positive to take logarithms"));
    }
    let lx: Vec<f64> = medians.iter().map(|(m, _)| m.ln()).collect();
    let ly: Vec<f64> = medians.iter().map(|(_, v)| v.ln()).collect();
    let (slope, intercept) = ols_fit(&lx, &ly);
    Ok(SweepSummary {
        medians,
        slope,
        intercept,
    })
}

/// Long-format CSV: `m,replicate,mse,bound_upper,bound_lower`.
pub fn write_sweep_csv(mut w: impl Write, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "m,replicate,mse,bound_upper,bound_lower")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.m, r.replicate, r.mse, r.bound_upper, r.bound_lower)?;
    }
    Ok(())
}

/// Settings for [`run_movielens`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieLensConfig {
    pub n_fit: usize,
    pub n_test: usize,
    /// Ratings used for completion; `None` takes everything not used for fitting or testing.
    pub n_solve: Option<usize>,
    pub alpha: f64,
    pub rank: usize,
    pub reg: f64,
    pub seed: u64,
    pub labels: Vec<f64>,
    pub solver: SolverConfig,
    pub fit: FitConfig,
}

impl Default for MovieLensConfig {
    fn default() -> Self {
        Self {
            n_fit: 5000,
            n_test: 5000,
            n_solve: None,
            alpha: 5.0,
            rank: 5,
            reg: 1e-6,
            seed: 0,
            labels: default_labels(5),
            solver: SolverConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

/// Disjoint random fit / solve / test subsets of a rating list.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingSplit {
    pub fit: Vec<Rating>,
    pub solve: Vec<Rating>,
    pub test: Vec<Rating>,
}

pub fn split_ratings(
    ratings: &[Rating],
    n_fit: usize,
    n_test: usize,
    n_solve: Option<usize>,
    seed: u64,
) -> Result<RatingSplit> {
    let rest = ratings
        .len()
        .checked_sub(n_fit + n_test)
        .ok_or_else(|| invalid(format!(
            "{} ratings cannot supply {n_fit} fitting and {n_test} test ratings",
            ratings.len()
        )))?;
    let n_solve = n_solve.unwrap_or(rest);
    if n_solve > rest || n_solve == 0 || n_test == 0 || n_fit == 0 {
        return Err(invalid(format!(
            "invalid split sizes: fit {n_fit}, solve {n_solve}, test {n_test} of {}",
            ratings.len()
        )));
    }
    let mut shuffled = ratings.to_vec();
    shuffled.shuffle(&mut rng_from_seed(seed));
    let fit = shuffled[..n_fit].to_vec();
    let test = shuffled[n_fit..n_fit + n_test].to_vec();
    let solve = shuffled[n_fit + n_test..n_fit + n_test + n_solve].to_vec();
    Ok(RatingSplit { fit, solve, test })
}

#[derive(Debug, Clone, Serialize)]
pub struct MovieLensOutcome {
    pub d1: usize,
    pub d2: usize,
    pub n_fit: usize,
    pub n_solve: usize,
    pub n_test: usize,
    pub link_fit: LinkFit,
    pub family: LinkFamily,
    pub categorical: RatingReport,
    pub baseline: RatingReport,
    pub categorical_iters: usize,
    pub categorical_converged: bool,
    pub baseline_iters: usize,
    pub baseline_converged: bool,
    pub prediction_ties: usize,
}

/// Fits the link on the fitting ratings (input = the rating value itself),
/// completes the matrix from the solve ratings by the categorical estimator
/// and by least squares, and scores both on the test ratings.
pub fn run_movielens(ratings: &[Rating], cfg: &MovieLensConfig) -> Result<MovieLensOutcome> {
    if ratings.is_empty() {
        return Err(invalid("no ratings"));
    }
    let d1 = ratings.iter().map(|r| r.user).max().unwrap_or(0);
    let d2 = ratings.iter().map(|r| r.item).max().unwrap_or(0);
    let split = split_ratings(ratings, cfg.n_fit, cfg.n_test, cfg.n_solve, cfg.seed)?;
    let labels = &cfg.labels;
    let k = labels.len();

    let fit_obs = ratings_to_observations(&split.fit, labels, d1, d2)?;
    let pairs = fit_obs
        .entries()
        .iter()
        .map(|o| (fit_obs.label(o), o.category))
        .collect();
    let link_fit = fit_logit(&TrainingPairs::new(k, pairs)?, cfg.reg, &cfg.fit)?;
    let link = LinkFamily::from(link_fit.family.clone());

    let spec = ConstraintSpec::new(cfg.alpha, cfg.rank, d1, d2)?;
    let solve_obs = ratings_to_observations(&split.solve, labels, d1, d2)?;
    let test_obs = ratings_to_observations(&split.test, labels, d1, d2)?;

    let est = solve(&link, &solve_obs, &spec, &cfg.solver)?;
    let prediction = predict_categories(&link, &est.x, labels, Some(cfg.alpha))?;
    let categorical = rating_report(&test_obs, &prediction.labels)?;

    let base = baseline_real_completion(&solve_obs, &spec, &cfg.solver)?;
    let baseline = rating_report(&test_obs, &round_to_labels(&base.x, labels)?)?;

    Ok(MovieLensOutcome {
        d1,
        d2,
        n_fit: split.fit.len(),
        n_solve: split.solve.len(),
        n_test: split.test.len(),
        link_fit,
        family: link,
        categorical,
        baseline,
        categorical_iters: est.iters,
        categorical_converged: est.converged,
        baseline_iters: base.iters,
        baseline_converged: base.converged,
        prediction_ties: prediction.ties,
    })
}
