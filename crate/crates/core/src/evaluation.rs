//! Predictions from a recovered matrix, rating-error reports, the
//! real-valued completion baseline and the closed-form error bounds.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSpec;
use crate::error::{invalid, Result};
use crate::links::{LinkFamily, SmoothnessReport};
use crate::numeric::CompensatedSum;
use crate::sampling::{validate_labels, ObservationSet};
use crate::solver::{maximize, Estimate, Objective, SolverConfig};

/// Per-cell predicted labels and how often the argmax needed help.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Array2<f64>,
    pub categories: Array2<usize>,
    /// Cells where more than one category attained the maximal probability.
    pub ties: usize,
    /// Cells whose input was moved into the family's domain first.
    pub clamped: usize,
}

/// Predicts `a_{k*}` with `k* = argmax_k f_k(X_ij)`, taking the lowest `k` on ties.
///
/// With `alpha` given, inputs outside `[-α, α]` are clamped first. Tabular
/// families are evaluated at the nearest valid row.
pub fn predict_categories(
    family: &LinkFamily,
    x: &Array2<f64>,
    labels: &[f64],
    alpha: Option<f64>,
) -> Result<Prediction> {
    validate_labels(labels)?;
    if labels.len() != family.k() {
        return Err(invalid(format!(
            "{} labels supplied for a family with K = {}",
            labels.len(),
            family.k()
        )));
    }
    let mut categories = Array2::zeros(x.dim());
    let mut ties = 0;
    let mut clamped = 0;
    let mut probs = vec![0.0; family.k()];
    for ((i, j), &raw) in x.indexed_iter() {
        if !raw.is_finite() {
            return Err(invalid(format!("entry ({i}, {j}) is not finite")));
        }
        let mut v = raw;
        if let Some(a) = alpha {
            if v.abs() > a {
                v = v.clamp(-a, a);
                clamped += 1;
            }
        }
        match family {
            LinkFamily::Logit(f) => f.probs_into(v, &mut probs),
            LinkFamily::Tabular(t) => {
                let (row, moved) = t.nearest_row(v);
                if moved {
                    clamped += 1;
                }
                probs.copy_from_slice(&t.table()[row]);
            }
        }
        let (best, max) = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &p)| if p > bv { (k, p) } else { (bk, bv) });
        if probs.iter().filter(|&&p| p == max).count() > 1 {
            ties += 1;
        }
        categories[[i, j]] = best;
    }
    if clamped > 0 {
        log::warn!("{clamped} entries were moved into the link domain before prediction");
    }
    let labels = categories.mapv(|k| labels[k]);
    Ok(Prediction {
        labels,
        categories,
        ties,
        clamped,
    })
}

/// Rounds each entry to the nearest label (ties go to the larger label),
/// clamping to `[a_1, a_K]`.
pub fn round_to_labels(x: &Array2<f64>, labels: &[f64]) -> Result<Array2<f64>> {
    validate_labels(labels)?;
    Ok(x.mapv(|v| {
        let mut best = labels[0];
        for &l in labels {
            if (v - l).abs() <= (v - best).abs() {
                best = l;
            }
        }
        best
    }))
}

/// Mean absolute label error, split by true category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub labels: Vec<f64>,
    /// `None` where no test cell has that true category.
    pub per_category: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub overall: f64,
}

/// Compares predicted labels against the held-out truths in `test`.
pub fn rating_report(test: &ObservationSet, predicted: &Array2<f64>) -> Result<RatingReport> {
    if test.is_empty() {
        return Err(invalid("test set is empty"));
    }
    if predicted.dim() != test.dims() {
        return Err(invalid(format!(
            "predictions are {:?} but the test set is {}x{}",
            predicted.dim(),
            test.d1(),
            test.d2()
        )));
    }
    let k = test.k();
    let mut sums = vec![CompensatedSum::new(); k];
    let mut counts = vec![0usize; k];
    let mut total = CompensatedSum::new();
    for o in test.entries() {
        let err = (test.label(o) - predicted[[o.row, o.col]]).abs();
        sums[o.category].add(err);
        counts[o.category] += 1;
        total.add(err);
    }
    let per_category = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.value() / c as f64))
        .collect();
    Ok(RatingReport {
        labels: test.labels().to_vec(),
        per_category,
        counts,
        overall: total.value() / test.len() as f64,
    })
}

fn format_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Plain-text table with one row per named report: columns are the labels, then Overall.
pub fn rating_table(rows: &[(&str, &RatingReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<name_width$}", "");
    for l in &first.labels {
        let _ = write!(out, " {:>8}", format_label(*l));
    }
    let _ = writeln!(out, " {:>8}", "Overall");
    for (name, report) in rows {
        let _ = write!(out, "{name:<name_width$}");
        for v in &report.per_category {
            match v {
                Some(v) => {
                    let _ = write!(out, " {v:>8.3}");
                }
                None => {
                    let _ = write!(out, " {:>8}", "-");
                }
            }
        }
        let _ = writeln!(out, " {:>8.3}", report.overall);
    }
    let _ = write!(out, "{:<name_width$}", "count");
    for c in &first.counts {
        let _ = write!(out, " {c:>8}");
    }
    let total: usize = first.counts.iter().sum();
    let _ = writeln!(out, " {total:>8}");
    out
}

/// Negative squared loss `−Σ_Ω (X_ij − y_ij)²` of real-valued observations.
#[derive(Debug, Clone, Copy)]
pub struct SquaredLoss<'a> {
    obs: &'a ObservationSet,
}

impl<'a> SquaredLoss<'a> {
    pub fn new(obs: &'a ObservationSet) -> Self {
        Self { obs }
    }
}

impl Objective for SquaredLoss<'_> {
    fn value(&self, x: &Array2<f64>) -> f64 {
        let mut sum = CompensatedSum::new();
        for o in self.obs.entries() {
            let r = x[[o.row, o.col]] - self.obs.label(o);
            sum.add(-r * r);
        }
        sum.value()
    }

    fn gradient(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(x.dim());
        for o in self.obs.entries() {
            g[[o.row, o.col]] += -2.0 * (x[[o.row, o.col]] - self.obs.label(o));
        }
        g
    }
}

/// Least-squares completion of the observed labels over the same constraint
/// set as the categorical estimator. `final_ll` holds the negative squared loss.
pub fn baseline_real_completion(
    obs: &ObservationSet,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<Estimate> {
    spec.validate()?;
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
    if let Some(l) = obs.labels().iter().find(|l| l.abs() > spec.alpha) {
        return Err(invalid(format!(
            "label {l} lies outside the box [-{a}, {a}]",
            a = spec.alpha
        )));
    }
    maximize(&SquaredLoss::new(obs), spec, cfg)
}

/// `(1/d₁d₂)‖M − M̂‖_F²`.
pub fn mse_per_entry(m: &Array2<f64>, m_hat: &Array2<f64>) -> Result<f64> {
    if m.dim() != m_hat.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {:?} vs {:?}",
            m.dim(),
            m_hat.dim()
        )));
    }
    if m.is_empty() {
        return Err(invalid("empty matrices"));
    }
    let sum: CompensatedSum = m.iter().zip(m_hat).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok(sum.value() / m.len() as f64)
}

/// Unspecified absolute constants of the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConstants {
    pub c_prime: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c_prime: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `√2 C′αK L_α/β⁻ · √(r(d₁+d₂)/m)`.
    pub upper_simple: f64,
    /// `C′αK L_α/β⁻ · √(r(d₁+d₂)/m) · √(1 + (d₁+d₂) log(d₁d₂)/m)`.
    pub upper_full: f64,
    /// `min{C₁, C₂ α/√(Kβ⁺) · √(r max(d₁,d₂)/m)}`.
    pub lower: f64,
    /// `upper_simple / lower`.
    pub ratio: f64,
    /// `K^{3/2} L_α √β⁺ / β⁻`.
    pub gap_factor: f64,
    /// Whether `m ≥ (d₁+d₂) log(d₁d₂)`, where the simple upper bound applies.
    pub simple_form_valid: bool,
    pub k: usize,
    pub l_alpha: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub alpha: f64,
    pub r: usize,
    pub d1: usize,
    pub d2: usize,
    pub m: usize,
    pub constants: BoundConstants,
}

/// Evaluates the upper and lower error-bound expressions.
pub fn bound_report(
    smooth: &SmoothnessReport,
    spec: &ConstraintSpec,
    m: usize,
    k: usize,
    constants: BoundConstants,
) -> Result<BoundReport> {
    spec.validate()?;
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    if k < 2 {
        return Err(invalid(format!("K must be at least 2, got {k}")));
    }
    if (smooth.alpha - spec.alpha).abs() > 1e-12 * spec.alpha {
        return Err(invalid(format!(
            "smoothness constants were computed for alpha = {} but the constraint uses {}",
            smooth.alpha, spec.alpha
        )));
    }
    for (name, v) in [
        ("L_alpha", smooth.l_alpha),
        ("beta_minus", smooth.beta_minus),
        ("beta_plus", smooth.beta_plus),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    for (name, v) in [
        ("c_prime", constants.c_prime),
        ("c1", constants.c1),
        ("c2", constants.c2),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let (d1, d2, r) = (spec.d1 as f64, spec.d2 as f64, spec.rank as f64);
    let (alpha, mf, kf) = (spec.alpha, m as f64, k as f64);
    let lead = constants.c_prime * alpha * kf * smooth.l_alpha / smooth.beta_minus;
    let rate = (r * (d1 + d2) / mf).sqrt();
    let log_term = (d1 + d2) * (d1 * d2).ln() / mf;
    let upper_full = lead * rate * (1.0 + log_term).sqrt();
    let upper_simple = std::f64::consts::SQRT_2 * lead * rate;
    let lower_rate = constants.c2 * alpha / (kf * smooth.beta_plus).sqrt() * (r * d1.max(d2) / mf).sqrt();
    let lower = constants.c1.min(lower_rate);
    Ok(BoundReport {
        upper_simple,
        upper_full,
        lower,
        ratio: upper_simple / lower,
        gap_factor: kf.powf(1.5) * smooth.l_alpha * smooth.beta_plus.sqrt() / smooth.beta_minus,
        simple_form_valid: mf >= (d1 + d2) * (d1 * d2).ln(),
        k,
        l_alpha: smooth.l_alpha,
        beta_minus: smooth.beta_minus,
        beta_plus: smooth.beta_plus,
        alpha,
        r: spec.rank,
        d1: spec.d1,
        d2: spec.d2,
        m,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::links::{MultinomialLogitFamily, TabularLinkFamily};
    use crate::sampling::{default_labels, Observation};
    use ndarray::array;

    #[test]
    fn uniform_family_ties_everywhere() {
        let fam = LinkFamily::from(MultinomialLogitFamily::uniform(4).unwrap());
        let x = array![[0.3, -1.0, 2.0], [0.0, 0.5, -0.5]];
        let p = predict_categories(&fam, &x, &default_labels(4), None).unwrap();
        assert_eq!(p.ties, 6);
        assert!(p.labels.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn mood_family_predicts_the_centre() {
        let fam = LinkFamily::from(TabularLinkFamily::mood(5).unwrap());
        let p = predict_categories(&fam, &array![[3.0, 1.0, 5.0]], &default_labels(5), None).unwrap();
        assert_eq!(p.labels, array![[3.0, 1.0, 5.0]]);
        assert_eq!(p.ties, 0);
        assert_eq!(p.clamped, 0);
        let p = predict_categories(&fam, &array![[2.6, 9.0]], &default_labels(5), None).unwrap();
        assert_eq!(p.labels, array![[3.0, 5.0]]);
        assert_eq!(p.clamped, 2);
    }

    #[test]
    fn out_of_box_inputs_are_clamped_and_counted() {
        let fam = LinkFamily::from(MultinomialLogitFamily::evenly_spaced(3).unwrap());
        let p = predict_categories(&fam, &array![[5.0, 0.2]], &default_labels(3), Some(1.0)).unwrap();
        assert_eq!(p.clamped, 1);
        assert_eq!(p.labels[[0, 0]], 3.0);
    }

    #[test]
    fn rounding_rules() {
        let labels = default_labels(5);
        let out = round_to_labels(&array![[2.5, 2.49, 0.2, 7.0, 3.5, -1.0]], &labels).unwrap();
        assert_eq!(out, array![[3.0, 2.0, 1.0, 5.0, 4.0, 1.0]]);
    }

    fn test_set(cells: &[(usize, usize, usize)]) -> ObservationSet {
        let entries = cells
            .iter()
            .map(|&(row, col, category)| Observation { row, col, category })
            .collect();
        ObservationSet::new(2, 3, default_labels(5), entries).unwrap()
    }

    #[test]
    fn perfect_predictions_report_zero() {
        let test = test_set(&[(0, 0, 0), (1, 2, 4), (0, 1, 2)]);
        let mut pred = Array2::zeros((2, 3));
        pred[[0, 0]] = 1.0;
        pred[[1, 2]] = 5.0;
        pred[[0, 1]] = 3.0;
        let r = rating_report(&test, &pred).unwrap();
        assert_eq!(r.overall, 0.0);
        assert_eq!(r.per_category, vec![Some(0.0), None, Some(0.0), None, Some(0.0)]);
        assert_eq!(r.counts, vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn all_fives_predicted_as_four() {
        let test = test_set(&[(0, 0, 4), (1, 2, 4), (0, 1, 4)]);
        let pred = Array2::from_elem((2, 3), 4.0);
        let r = rating_report(&test, &pred).unwrap();
        assert_eq!(r.per_category[4], Some(1.0));
        assert_eq!(r.overall, 1.0);
        let table = rating_table(&[("categorical", &r)]);
        assert!(table.contains("Overall"));
        assert!(table.lines().nth(1).unwrap().contains("1.000"));
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let test = test_set(&[]);
        assert!(rating_report(&test, &Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn mse_examples() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(mse_per_entry(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_per_entry(&a, &(&a - 1.0)).unwrap(), 1.0);
        assert!(mse_per_entry(&a, &array![[1.0]]).is_err());
    }

    fn smooth(alpha: f64) -> SmoothnessReport {
        SmoothnessReport {
            alpha,
            l_alpha: 1.5,
            beta_minus: 0.05,
            beta_plus: 0.4,
            grid_size: 1001,
        }
    }

    #[test]
    fn bound_closed_forms() {
        let spec = ConstraintSpec::new(2.0, 3, 50, 80).unwrap();
        let c = BoundConstants { c_prime: 1.0, c1: 1e9, c2: 1.0 };
        let b = bound_report(&smooth(2.0), &spec, 1000, 5, c).unwrap();
        let want = 2f64.sqrt() * 2.0 * 5.0 * 1.5 / 0.05 * (3.0 * 130.0 / 1000.0f64).sqrt();
        assert!((b.upper_simple - want).abs() <= 1e-12 * want);
        let lower = 2.0 / (5.0f64 * 0.4).sqrt() * (3.0 * 80.0 / 1000.0f64).sqrt();
        assert!((b.lower - lower).abs() <= 1e-12 * lower);
        let capped = bound_report(&smooth(2.0), &spec, 10, 5, BoundConstants::default()).unwrap();
        assert_eq!(capped.lower, 1.0);
        assert!(bound_report(&smooth(2.0), &spec, 0, 5, c).is_err());
        assert!(bound_report(&smooth(1.0), &spec, 10, 5, c).is_err());
    }
}
