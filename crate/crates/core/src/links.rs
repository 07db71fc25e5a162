//! Link-function families mapping a real matrix entry to a categorical
//! distribution over `K` outcomes.
//!
//! Two families are provided:
//!
//! * [`MultinomialLogitFamily`]: `f_k(x) ∝ exp(α_k + β_k x)`, smooth and
//!   strictly positive, usable by the maximum-likelihood solver.
//! * [`TabularLinkFamily`]: an explicit `K×K` table defined on the integer
//!   inputs `1..=K` (for example the "mood" confusion model). It has zero
//!   cells and no derivatives, so it is only used for sampling and prediction.
//!
//! The smoothness constants `L_α`, `β_α⁻` and `β_α⁺` that drive the recovery
//! bounds are computed by [`smoothness_constants`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::log_sum_exp;

/// Relative change allowed in each smoothness constant when the grid is doubled.
pub const REFINEMENT_TOL: f64 = 1e-4;
/// `β_α⁻` below this value means the family is effectively flat somewhere.
pub const DEGENERACY_FLOOR: f64 = 1e-12;
pub const MIN_GRID_SIZE: usize = 64;

const ROW_SUM_TOL: f64 = 1e-12;
const INTEGER_TOL: f64 = 1e-9;

/// `f_k(x) = exp(α_k + β_k x) / Σ_j exp(α_j + β_j x)`, normalized so that the
/// last category is the reference (`α_K = β_K = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialLogitFamily {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl MultinomialLogitFamily {
    /// Builds a family from arbitrary intercepts and slopes. The parameters are
    /// shifted so the last category is the reference; the probabilities are
    /// unchanged by the shift.
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.len() != betas.len() {
            return Err(invalid(format!(
                "alphas and betas differ in length ({} vs {})",
                alphas.len(),
                betas.len()
            )));
        }
        if alphas.len() < 2 {
            return Err(invalid("a link family needs at least 2 categories"));
        }
        if alphas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(invalid("link parameters must be finite"));
        }
        let (a_ref, b_ref) = (*alphas.last().unwrap(), *betas.last().unwrap());
        Ok(Self {
            alphas: alphas.iter().map(|a| a - a_ref).collect(),
            betas: betas.iter().map(|b| b - b_ref).collect(),
        })
    }

    /// All parameters zero: every category has probability `1/K` everywhere.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![0.0; k], vec![0.0; k])
    }

    /// Default demonstration family: zero intercepts and slopes evenly spaced
    /// in `[-1, 1]`, giving ordered, overlapping bumps.
    pub fn evenly_spaced(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid("a link family needs at least 2 categories"));
        }
        let betas = (0..k)
            .map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64)
            .collect();
        Self::new(vec![0.0; k], betas)
    }

    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// True when all slopes coincide, i.e. `f` does not depend on `x`.
    pub fn is_flat(&self) -> bool {
        let b0 = self.betas[0];
        self.betas.iter().all(|&b| b == b0)
    }

    #[inline]
    fn score(&self, k: usize, x: f64) -> f64 {
        self.alphas[k] + self.betas[k] * x
    }

    fn max_score(&self, x: f64) -> f64 {
        (0..self.k()).map(|k| self.score(k, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes `f_1(x), …, f_K(x)` into `out`.
    pub fn probs_into(&self, x: f64, out: &mut [f64]) {
        let max = self.max_score(x);
        let mut total = 0.0;
        for (k, o) in out.iter_mut().enumerate() {
            *o = (self.score(k, x) - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    pub fn probs(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        self.probs_into(x, &mut out);
        out
    }

    /// `log f_k(x)` evaluated in log space; finite for every finite `x`.
    pub fn log_prob(&self, k: usize, x: f64) -> f64 {
        let scores: Vec<f64> = (0..self.k()).map(|j| self.score(j, x)).collect();
        scores[k] - log_sum_exp(&scores)
    }

    /// `(log f_k(x), f_k'(x)/f_k(x))` in one pass, without allocating.
    pub fn log_prob_and_score(&self, k: usize, x: f64) -> (f64, f64) {
        let max = self.max_score(x);
        let mut total = 0.0;
        let mut weighted = 0.0;
        for j in 0..self.k() {
            let w = (self.score(j, x) - max).exp();
            total += w;
            weighted += w * self.betas[j];
        }
        let log_p = self.score(k, x) - max - total.ln();
        (log_p, self.betas[k] - weighted / total)
    }

    /// `Σ_j β_j f_j(x)`.
    pub fn mean_slope(&self, x: f64) -> f64 {
        let p = self.probs(x);
        p.iter().zip(&self.betas).map(|(p, b)| p * b).sum()
    }

    /// `f_k'(x) = f_k(x) (β_k − Σ_j β_j f_j(x))`.
    pub fn derivs(&self, x: f64) -> Vec<f64> {
        let p = self.probs(x);
        let mean: f64 = p.iter().zip(&self.betas).map(|(p, b)| p * b).sum();
        p.iter().zip(&self.betas).map(|(p, b)| p * (b - mean)).collect()
    }

    /// `max_k |f_k'(x)| / f_k(x)`.
    pub fn max_abs_score(&self, x: f64) -> f64 {
        let mean = self.mean_slope(x);
        self.betas.iter().fold(0.0, |m, b| m.max((b - mean).abs()))
    }

    /// `β_α(x) = max_k f_k'(x)² / f_k(x)`.
    pub fn peak_information(&self, x: f64) -> f64 {
        let p = self.probs(x);
        let mean: f64 = p.iter().zip(&self.betas).map(|(p, b)| p * b).sum();
        p.iter()
            .zip(&self.betas)
            .fold(0.0, |m, (p, b)| m.max(p * (b - mean) * (b - mean)))
    }
}

/// Explicit link table `table[x-1][k] = f_k(x)` for integer inputs `x ∈ 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularLinkFamily {
    table: Vec<Vec<f64>>,
}

impl TabularLinkFamily {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let k = table.len();
        if k < 2 {
            return Err(invalid("a tabular family needs at least 2 categories"));
        }
        for (r, row) in table.iter().enumerate() {
            if row.len() != k {
                return Err(invalid(format!("table row {} has {} entries, expected {k}", r + 1, row.len())));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(format!("table row {} has entries outside [0, 1]", r + 1)));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid(format!("table row {} sums to {s}, not 1", r + 1)));
            }
        }
        Ok(Self { table })
    }

    /// The mood model: a rater reports one category too low with probability
    /// 0.2, one too high with probability 0.2, and the true category otherwise.
    /// At the two ends the out-of-range mass folds back onto the end category.
    pub fn mood(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid("a tabular family needs at least 2 categories"));
        }
        let mut table = vec![vec![0.0; k]; k];
        for (x, row) in table.iter_mut().enumerate() {
            if x == 0 {
                row[0] = 0.8;
                row[1] = 0.2;
            } else if x == k - 1 {
                row[k - 2] = 0.2;
                row[k - 1] = 0.8;
            } else {
                row[x - 1] = 0.2;
                row[x] = 0.6;
                row[x + 1] = 0.2;
            }
        }
        Self::new(table)
    }

    pub fn k(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// Maps an input to its table row; inputs must be integers in `1..=K`.
    pub fn row_index(&self, x: f64) -> Result<usize> {
        let r = x.round();
        if (x - r).abs() > INTEGER_TOL || r < 1.0 || r > self.k() as f64 {
            return Err(invalid(format!(
                "tabular family is defined on integers 1..={}, got {x}",
                self.k()
            )));
        }
        Ok(r as usize - 1)
    }

    /// Nearest valid row for an arbitrary real input, and whether it was clamped.
    pub fn nearest_row(&self, x: f64) -> (usize, bool) {
        let r = x.round().clamp(1.0, self.k() as f64);
        (r as usize - 1, (x - r).abs() > INTEGER_TOL)
    }

    pub fn probs(&self, x: f64) -> Result<Vec<f64>> {
        Ok(self.table[self.row_index(x)?].clone())
    }
}

/// A link family of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyDoc", into = "FamilyDoc")]
pub enum LinkFamily {
    Logit(MultinomialLogitFamily),
    Tabular(TabularLinkFamily),
}

impl LinkFamily {
    pub fn k(&self) -> usize {
        match self {
            LinkFamily::Logit(f) => f.k(),
            LinkFamily::Tabular(t) => t.k(),
        }
    }

    pub fn as_logit(&self) -> Option<&MultinomialLogitFamily> {
        match self {
            LinkFamily::Logit(f) => Some(f),
            LinkFamily::Tabular(_) => None,
        }
    }

    /// Requires a differentiable family, as the solver does.
    pub fn require_logit(&self) -> Result<&MultinomialLogitFamily> {
        self.as_logit().ok_or_else(|| {
            Error::Unsupported("tabular link families have no derivatives and cannot be used here".into())
        })
    }

    pub fn eval_probs(&self, x: f64) -> Result<Vec<f64>> {
        eval_probs(self, x)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("link family serializes")
    }
}

impl From<MultinomialLogitFamily> for LinkFamily {
    fn from(f: MultinomialLogitFamily) -> Self {
        LinkFamily::Logit(f)
    }
}

impl From<TabularLinkFamily> for LinkFamily {
    fn from(t: TabularLinkFamily) -> Self {
        LinkFamily::Tabular(t)
    }
}

/// On-disk JSON layout of a link family.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FamilyDoc {
    kind: String,
    #[serde(rename = "K")]
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<Vec<f64>>>,
}

impl TryFrom<FamilyDoc> for LinkFamily {
    type Error = Error;

    fn try_from(doc: FamilyDoc) -> Result<Self> {
        let family = match doc.kind.as_str() {
            "logit" => {
                let (Some(a), Some(b)) = (doc.alphas, doc.betas) else {
                    return Err(invalid("logit family requires \"alphas\" and \"betas\""));
                };
                LinkFamily::Logit(MultinomialLogitFamily::new(a, b)?)
            }
            "tabular" => {
                let Some(table) = doc.table else {
                    return Err(invalid("tabular family requires \"table\""));
                };
                LinkFamily::Tabular(TabularLinkFamily::new(table)?)
            }
            other => return Err(invalid(format!("unknown link family kind {other:?}"))),
        };
        if family.k() != doc.k {
            return Err(invalid(format!(
                "declared K = {} but parameters describe {} categories",
                doc.k,
                family.k()
            )));
        }
        Ok(family)
    }
}

impl From<LinkFamily> for FamilyDoc {
    fn from(f: LinkFamily) -> Self {
        match f {
            LinkFamily::Logit(l) => FamilyDoc {
                kind: "logit".into(),
                k: l.k(),
                alphas: Some(l.alphas),
                betas: Some(l.betas),
                table: None,
            },
            LinkFamily::Tabular(t) => FamilyDoc {
                kind: "tabular".into(),
                k: t.k(),
                alphas: None,
                betas: None,
                table: Some(t.table),
            },
        }
    }
}

/// `(f_1(x), …, f_K(x))`.
pub fn eval_probs(family: &LinkFamily, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(invalid(format!("link input must be finite, got {x}")));
    }
    match family {
        LinkFamily::Logit(f) => Ok(f.probs(x)),
        LinkFamily::Tabular(t) => t.probs(x),
    }
}

/// `(f_1'(x), …, f_K'(x))`; only defined for the logit family.
pub fn eval_derivs(family: &LinkFamily, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(invalid(format!("link input must be finite, got {x}")));
    }
    Ok(family.require_logit()?.derivs(x))
}

/// Smoothness constants of a family on `[-α, α]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub alpha: f64,
    /// `sup_{k, |x|≤α} |f_k'(x)| / f_k(x)`.
    pub l_alpha: f64,
    /// `inf_{|x|≤α} max_k f_k'(x)² / f_k(x)`.
    pub beta_minus: f64,
    /// `sup_{|x|≤α} max_k f_k'(x)² / f_k(x)`.
    pub beta_plus: f64,
    pub grid_size: usize,
}

/// Computes `L_α`, `β_α⁻`, `β_α⁺` by a uniform grid search over `[-α, α]`
/// (`grid_size` points, both endpoints included), followed by a golden-section
/// refinement of each extremum inside the grid cell pair that brackets it.
pub fn smoothness_constants(
    family: &MultinomialLogitFamily,
    alpha: f64,
    grid_size: usize,
) -> Result<SmoothnessReport> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive and finite, got {alpha}")));
    }
    if grid_size < MIN_GRID_SIZE {
        return Err(invalid(format!("grid_size must be at least {MIN_GRID_SIZE}, got {grid_size}")));
    }
    let h = 2.0 * alpha / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| if i + 1 == grid_size { alpha } else { -alpha + h * i as f64 })
        .collect();

    let score = |x: f64| family.max_abs_score(x);
    let info = |x: f64| family.peak_information(x);

    let l_alpha = refine_extremum(&grid, score, Extremum::Max);
    let beta_minus = refine_extremum(&grid, info, Extremum::Min);
    let beta_plus = refine_extremum(&grid, info, Extremum::Max);

    if !(beta_minus >= DEGENERACY_FLOOR) {
        return Err(Error::DegenerateFamily(format!(
            "inf over [-{alpha}, {alpha}] of max_k f_k'^2/f_k is {beta_minus:e}; the family is flat there"
        )));
    }
    Ok(SmoothnessReport {
        alpha,
        l_alpha,
        beta_minus,
        beta_plus,
        grid_size,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Extremum {
    Min,
    Max,
}

fn refine_extremum(grid: &[f64], g: impl Fn(f64) -> f64, which: Extremum) -> f64 {
    let better = |a: f64, b: f64| match which {
        Extremum::Max => a > b,
        Extremum::Min => a < b,
    };
    let mut best_i = 0;
    let mut best = g(grid[0]);
    for (i, &x) in grid.iter().enumerate().skip(1) {
        let v = g(x);
        if better(v, best) {
            best = v;
            best_i = i;
        }
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let refined = golden_section(lo, hi, &g, which);
    if better(refined, best) {
        refined
    } else {
        best
    }
}

fn golden_section(mut lo: f64, mut hi: f64, g: &impl Fn(f64) -> f64, which: Extremum) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let sign = if which == Extremum::Max { 1.0 } else { -1.0 };
    let f = |x: f64| sign * g(x);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (hi - lo).abs() <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    sign * fc.max(fd)
}
