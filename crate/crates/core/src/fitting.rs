//! Maximum-likelihood fitting of a multinomial-logit link from
//! `(input, category)` pairs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::links::MultinomialLogitFamily;
use crate::numeric::{log_sum_exp, CompensatedSum};

/// Labelled inputs for link fitting. Categories are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPairs {
    k: usize,
    pairs: Vec<(f64, usize)>,
}

impl TrainingPairs {
    pub fn new(k: usize, pairs: Vec<(f64, usize)>) -> Result<Self> {
        if k < 2 {
            return Err(invalid("a link family needs at least 2 categories"));
        }
        for (n, &(x, c)) in pairs.iter().enumerate() {
            if !x.is_finite() {
                return Err(invalid(format!("pair {n}: input {x} is not finite")));
            }
            if c >= k {
                return Err(invalid(format!("pair {n}: category {c} is out of range for K = {k}")));
            }
        }
        let mut seen = vec![false; k];
        pairs.iter().for_each(|&(_, c)| seen[c] = true);
        if seen.iter().filter(|&&s| s).count() < 2 {
            return Err(Error::DegenerateData(
                "training pairs must contain at least 2 distinct categories".into(),
            ));
        }
        let first = pairs[0].0;
        if pairs.iter().all(|&(x, _)| x == first) {
            return Err(Error::DegenerateData(
                "training pairs must contain at least 2 distinct inputs".into(),
            ));
        }
        Ok(Self { k, pairs })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pairs(&self) -> &[(f64, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Stop once the largest gradient component of the per-pair objective is this small.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-9,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(invalid(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        for (name, v) in [("armijo_c", self.armijo_c), ("backtrack_factor", self.backtrack_factor)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// A fitted family plus optimizer diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct LinkFit {
    #[serde(skip)]
    pub family: MultinomialLogitFamily,
    pub iterations: usize,
    /// Final value of `(1/n)[Σ log f − reg‖θ‖²]`.
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub warning: Option<String>,
}

/// Parameters `θ = (α_1..α_{K−1}, β_1..β_{K−1})`; category `K` is the reference.
struct Problem<'a> {
    data: &'a TrainingPairs,
    reg: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        2 * (self.data.k - 1)
    }

    fn scores(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let free = self.data.k - 1;
        for j in 0..free {
            out[j] = theta[j] + theta[free + j] * x;
        }
        out[free] = 0.0;
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut s = vec![0.0; self.data.k];
        let mut total = CompensatedSum::new();
        for &(x, c) in &self.data.pairs {
            self.scores(theta, x, &mut s);
            total.add(s[c] - log_sum_exp(&s));
        }
        let penalty: f64 = theta.iter().map(|t| t * t).sum();
        (total.value() - self.reg * penalty) / self.data.len() as f64
    }

    /// Gradient and the negated Hessian (positive semi-definite), both scaled by `1/n`.
    fn derivatives(&self, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (k, free, dim) = (self.data.k, self.data.k - 1, self.dim());
        let n = self.data.len() as f64;
        let mut g = vec![0.0; dim];
        let mut h = vec![vec![0.0; dim]; dim];
        let mut s = vec![0.0; k];
        for &(x, c) in &self.data.pairs {
            self.scores(theta, x, &mut s);
            let lse = log_sum_exp(&s);
            let p: Vec<f64> = s.iter().map(|v| (v - lse).exp()).collect();
            let feat = [1.0, x];
            for j in 0..free {
                let resid = if c == j { 1.0 } else { 0.0 } - p[j];
                g[j] += resid;
                g[free + j] += resid * x;
                for l in 0..free {
                    let w = if j == l { p[j] * (1.0 - p[j]) } else { -p[j] * p[l] };
                    for (a, fa) in feat.iter().enumerate() {
                        for (b, fb) in feat.iter().enumerate() {
                            h[a * free + j][b * free + l] += w * fa * fb;
                        }
                    }
                }
            }
        }
        for i in 0..dim {
            g[i] = (g[i] - 2.0 * self.reg * theta[i]) / n;
            for v in h[i].iter_mut() {
                *v /= n;
            }
            h[i][i] += 2.0 * self.reg / n;
        }
        (g, h)
    }

    fn family(&self, theta: &[f64]) -> Result<MultinomialLogitFamily> {
        let free = self.data.k - 1;
        let mut alphas = theta[..free].to_vec();
        let mut betas = theta[free..].to_vec();
        alphas.push(0.0);
        betas.push(0.0);
        MultinomialLogitFamily::new(alphas, betas)
    }
}

/// Solves `A d = b` for symmetric positive-definite `A`; `None` if `A` is not.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for p in 0..j {
                sum -= l[i][p] * l[j][p];
            }
            if i == j {
                if !(sum > 1e-14 * a[i][i].abs().max(1e-300)) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|p| l[i][p] * y[p]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|p| l[p][i] * x[p]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

/// Parameter magnitude beyond which the data are treated as separable.
const DIVERGENCE_LIMIT: f64 = 1e4;

/// Maximizes `Σ log f_{k_n}(x_n) − reg Σ_{k<K} (α_k² + β_k²)` by damped Newton
/// steps with Armijo backtracking.
///
/// Separable data have no finite maximizer when `reg = 0`; the fit then
/// reports `converged = false` with a warning instead of failing.
pub fn fit_logit(data: &TrainingPairs, reg: f64, cfg: &FitConfig) -> Result<LinkFit> {
    if !(reg.is_finite() && reg >= 0.0) {
        return Err(invalid(format!("reg must be non-negative, got {reg}")));
    }
    cfg.validate()?;
    let problem = Problem { data, reg };
    let mut theta = vec![0.0; problem.dim()];
    let mut f = problem.value(&theta);
    let mut iterations = 0;
    let mut converged = false;
    let mut warning = None;
    let mut grad_norm = f64::INFINITY;

    while iterations < cfg.max_iters {
        let (g, h) = problem.derivatives(&theta);
        grad_norm = g.iter().fold(0.0, |m, v| m.max(v.abs()));
        if grad_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        let mut dir = cholesky_solve(&h, &g).unwrap_or_else(|| g.clone());
        let mut slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            dir = g.clone();
            slope = g.iter().map(|v| v * v).sum();
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let ft = problem.value(&trial);
            if ft.is_finite() && ft >= f && ft >= f + cfg.armijo_c * step * slope {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= cfg.backtrack_factor;
        }
        iterations += 1;
        if !accepted {
            warning = Some(format!(
                "line search failed after {iterations} iterations; gradient norm {grad_norm:.3e}"
            ));
            break;
        }
        if theta.iter().any(|t| t.abs() > DIVERGENCE_LIMIT) {
            break;
        }
    }

    let max_param = theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mean_ll = loglik_of_theta(&problem, &theta);
    if reg == 0.0 && (max_param > DIVERGENCE_LIMIT || mean_ll > -1e-6) {
        converged = false;
        warning = Some(format!(
            "parameters diverge (largest |parameter| {max_param:.3e}, mean log-likelihood {mean_ll:.3e}); \
             the data appear separable, use reg > 0"
        ));
    } else if !converged && warning.is_none() {
        warning = Some(format!(
            "no convergence in {iterations} iterations; gradient norm {grad_norm:.3e}"
        ));
    }
    if let Some(w) = &warning {
        log::warn!("link fit: {w}");
    }
    Ok(LinkFit {
        family: problem.family(&theta)?,
        iterations,
        objective: f,
        grad_norm,
        converged,
        warning,
    })
}

fn loglik_of_theta(problem: &Problem<'_>, theta: &[f64]) -> f64 {
    Problem {
        data: problem.data,
        reg: 0.0,
    }
    .value(theta)
}

/// Mean per-pair log-likelihood of `data` under `family`.
pub fn loglik_of_fit(family: &MultinomialLogitFamily, data: &TrainingPairs) -> Result<f64> {
    if family.k() != data.k() {
        return Err(invalid(format!(
            "family has K = {} but the data have K = {}",
            family.k(),
            data.k()
        )));
    }
    let total: CompensatedSum = data.pairs.iter().map(|&(x, c)| family.log_prob(c, x)).collect();
    Ok(total.value() / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TrainingPairs::new(3, vec![(0.0, 0), (1.0, 3)]).is_err());
        assert!(matches!(
            TrainingPairs::new(3, vec![(0.0, 1), (1.0, 1)]),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            TrainingPairs::new(3, vec![(0.5, 0), (0.5, 1)]),
            Err(Error::DegenerateData(_))
        ));
        assert!(TrainingPairs::new(2, vec![(f64::NAN, 0), (1.0, 1)]).is_err());
        assert!(TrainingPairs::new(2, vec![(0.0, 0), (1.0, 1)]).is_ok());
    }

    #[test]
    fn cholesky_solves_small_system() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let x = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
        assert!(cholesky_solve(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 0.0]).is_none());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let pairs = (0..50).map(|i| (i as f64 / 10.0 - 2.5, i % 3)).collect();
        let data = TrainingPairs::new(3, pairs).unwrap();
        let problem = Problem { data: &data, reg: 0.1 };
        let theta = [0.3, -0.2, 0.5, 0.1];
        let (g, h) = problem.derivatives(&theta);
        let eps = 1e-6;
        for i in 0..4 {
            let mut plus = theta;
            plus[i] += eps;
            let mut minus = theta;
            minus[i] -= eps;
            let fd = (problem.value(&plus) - problem.value(&minus)) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-7, "gradient {i}: {fd} vs {}", g[i]);
            let (gp, _) = problem.derivatives(&plus);
            let (gm, _) = problem.derivatives(&minus);
            for j in 0..4 {
                let fd = -(gp[j] - gm[j]) / (2.0 * eps);
                assert!((fd - h[j][i]).abs() < 1e-6, "hessian {j},{i}: {fd} vs {}", h[j][i]);
            }
        }
    }

    #[test]
    fn uniform_family_log_likelihood() {
        let data = TrainingPairs::new(4, vec![(0.1, 0), (2.0, 3), (-1.0, 2)]).unwrap();
        let v = loglik_of_fit(&MultinomialLogitFamily::uniform(4).unwrap(), &data).unwrap();
        assert!((v - (0.25f64).ln()).abs() <= 1e-15);
    }
}
