//! KL divergence and squared Hellinger distance between categorical
//! distributions, their matrix-averaged forms, and the two inequalities used
//! by the recovery analysis:
//!
//! * a KL upper bound by a quadratic-ratio expression ([`kl_upper_bound`]);
//! * a Hellinger lower bound by the per-entry Frobenius error
//!   ([`hellinger_lb_gap`] returns the slack of that inequality).
//!
//! Logarithms are natural. An infinite KL divergence (`p_k > 0` where
//! `q_k = 0`) is returned as `f64::INFINITY` rather than an error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::links::{eval_probs, LinkFamily, MultinomialLogitFamily};
use crate::numeric::pairwise_sum;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceKind {
    #[serde(rename = "KL")]
    Kl,
    HellingerSq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub value: f64,
    pub kind: DivergenceKind,
    pub per_entry: Option<Array2<f64>>,
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid(format!("{name} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(invalid(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(invalid(format!("distributions differ in length ({} vs {})", p.len(), q.len())));
    }
    if p.is_empty() {
        return Err(invalid("empty distribution"));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")
}

/// `Σ_k p_k log(p_k / q_k)` with `0 · log(0/q) = 0`.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(kl_unchecked(p, q))
}

fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pk, &qk) in p.iter().zip(q) {
        if pk == 0.0 {
            continue;
        }
        if qk == 0.0 {
            return f64::INFINITY;
        }
        total += pk * (pk / qk).ln();
    }
    // Rounding can leave a tiny negative value for near-identical inputs.
    total.max(0.0)
}

/// `Σ_k (√p_k − √q_k)²`, in `[0, 2]`.
pub fn hellinger_sq(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(hellinger_unchecked(p, q))
}

fn hellinger_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum()
}

/// Entrywise divergence between the distributions induced by `P` and `Q`,
/// averaged over all `d₁ d₂` entries.
pub fn avg_matrix_divergence(
    family: &LinkFamily,
    p: &Array2<f64>,
    q: &Array2<f64>,
    kind: DivergenceKind,
) -> Result<DivergenceReport> {
    if p.dim() != q.dim() {
        return Err(invalid(format!("matrix dimensions differ: {:?} vs {:?}", p.dim(), q.dim())));
    }
    if p.is_empty() {
        return Err(invalid("empty matrices"));
    }
    let mut per_entry = Array2::zeros(p.dim());
    for ((idx, &x), &y) in p.indexed_iter().zip(q.iter()) {
        let fp = eval_probs(family, x)?;
        let fq = eval_probs(family, y)?;
        per_entry[idx] = match kind {
            DivergenceKind::Kl => kl_unchecked(&fp, &fq),
            DivergenceKind::HellingerSq => hellinger_unchecked(&fp, &fq),
        };
    }
    let flat: Vec<f64> = per_entry.iter().copied().collect();
    let value = pairwise_sum(&flat) / flat.len() as f64;
    Ok(DivergenceReport {
        value,
        kind,
        per_entry: Some(per_entry),
    })
}

/// Quadratic-ratio upper bound on `D(p ‖ q)`:
///
/// `Σ_{k<K} [(p_k−q_k)² + (p_k q_k − p_k²)(1−q_K) + (p_k q_k − q_k²)(1−p_K)] / [q_k (1 − Σ_{i<K} q_i)]`.
pub fn kl_upper_bound(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    if q.iter().any(|&v| v <= 0.0) {
        return Err(invalid("q must be strictly positive for the KL upper bound"));
    }
    let k = p.len();
    let (pk_last, qk_last) = (p[k - 1], q[k - 1]);
    let q_head: f64 = q[..k - 1].iter().sum();
    let tail = 1.0 - q_head;
    if tail <= 0.0 {
        return Err(invalid("1 - Σ_{k<K} q_k must be positive"));
    }
    let mut total = 0.0;
    for i in 0..k - 1 {
        let (x, y) = (p[i], q[i]);
        let num = (x - y) * (x - y) + (x * y - x * x) * (1.0 - qk_last) + (x * y - y * y) * (1.0 - pk_last);
        total += num / (y * tail);
    }
    Ok(total)
}

/// Slack of the Hellinger lower bound
/// `d_H²(f(M), f(M̂)) ≥ (β_α⁻/4) ‖M − M̂‖_F² / (d₁ d₂)`; non-negative whenever
/// the inequality holds.
pub fn hellinger_lb_gap(
    family: &MultinomialLogitFamily,
    m: &Array2<f64>,
    m_hat: &Array2<f64>,
    alpha: f64,
    beta_minus: f64,
) -> Result<f64> {
    if m.dim() != m_hat.dim() {
        return Err(invalid(format!("matrix dimensions differ: {:?} vs {:?}", m.dim(), m_hat.dim())));
    }
    let slack = 1e-12 * alpha;
    if m.iter().chain(m_hat.iter()).any(|v| !(v.abs() <= alpha + slack)) {
        return Err(invalid(format!("entries must lie in [-{alpha}, {alpha}]")));
    }
    let link = LinkFamily::Logit(family.clone());
    let hell = avg_matrix_divergence(&link, m, m_hat, DivergenceKind::HellingerSq)?.value;
    let sq: Vec<f64> = m.iter().zip(m_hat.iter()).map(|(a, b)| (a - b) * (a - b)).collect();
    let mse = pairwise_sum(&sq) / sq.len() as f64;
    Ok(hell - beta_minus / 4.0 * mse)
}
