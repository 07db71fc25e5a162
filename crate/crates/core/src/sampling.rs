//! Synthetic ground truth, the Bernoulli observation mask and categorical
//! response sampling.
//!
//! All randomness comes from `ChaCha8Rng` seeded with a 64-bit seed, and
//! cells are always visited in row-major order, so a seed reproduces the same
//! mask and the same responses on every platform.

use std::collections::HashSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSpec;
use crate::error::{invalid, Result};
use crate::linalg::{max_abs, nuclear_norm};
use crate::links::{eval_probs, LinkFamily};

pub type SampleRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a tag (splitmix64 mixing).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(stream))
}

/// One observed cell. `category` is 0-based (`0..K`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub category: usize,
}

/// Observed categorical entries of a `d1 × d2` matrix. Category `k` carries
/// the label `labels[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    d1: usize,
    d2: usize,
    labels: Vec<f64>,
    entries: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(d1: usize, d2: usize, labels: Vec<f64>, entries: Vec<Observation>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(invalid(format!("dimensions must be positive, got {d1}x{d2}")));
        }
        validate_labels(&labels)?;
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.row >= d1 || e.col >= d2 {
                return Err(invalid(format!(
                    "cell ({}, {}) outside a {d1}x{d2} matrix",
                    e.row, e.col
                )));
            }
            if e.category >= labels.len() {
                return Err(invalid(format!(
                    "category index {} out of range for K = {}",
                    e.category,
                    labels.len()
                )));
            }
            if !seen.insert((e.row, e.col)) {
                return Err(invalid(format!("cell ({}, {}) observed twice", e.row, e.col)));
            }
        }
        Ok(Self { d1, d2, labels, entries })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self, obs: &Observation) -> f64 {
        self.labels[obs.category]
    }

    /// Category index of a label value, if it is one of the labels.
    pub fn category_of(&self, label: f64) -> Option<usize> {
        category_of(&self.labels, label)
    }

    /// The same cells, with a different (larger) matrix shape.
    pub fn with_dims(&self, d1: usize, d2: usize) -> Result<Self> {
        Self::new(d1, d2, self.labels.clone(), self.entries.clone())
    }
}

pub(crate) fn category_of(labels: &[f64], label: f64) -> Option<usize> {
    labels.iter().position(|&l| (l - label).abs() <= 1e-9 * (1.0 + l.abs()))
}

pub(crate) fn validate_labels(labels: &[f64]) -> Result<()> {
    if labels.len() < 2 {
        return Err(invalid("at least 2 category labels are required"));
    }
    if labels.iter().any(|l| !l.is_finite()) {
        return Err(invalid("labels must be finite"));
    }
    if labels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("labels must be strictly increasing"));
    }
    Ok(())
}

/// Labels `1, 2, …, K`.
pub fn default_labels(k: usize) -> Vec<f64> {
    (1..=k).map(|v| v as f64).collect()
}

/// A ground-truth matrix together with the constraint set it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub m: Array2<f64>,
    pub spec: ConstraintSpec,
}

impl GroundTruth {
    /// Checks `‖M‖_∞ ≤ α` (1e-9 slack) and `‖M‖_* ≤ α√(r d₁ d₂)` (1e-6 relative slack).
    pub fn new(m: Array2<f64>, spec: ConstraintSpec) -> Result<Self> {
        spec.validate()?;
        if m.dim() != (spec.d1, spec.d2) {
            return Err(invalid(format!(
                "matrix is {:?} but the constraint set is {}x{}",
                m.dim(),
                spec.d1,
                spec.d2
            )));
        }
        let inf = max_abs(&m);
        if inf > spec.alpha + 1e-9 {
            return Err(invalid(format!("max |M_ij| = {inf} exceeds alpha = {}", spec.alpha)));
        }
        let nuc = nuclear_norm(&m)?;
        if nuc > spec.radius() * (1.0 + 1e-6) {
            return Err(invalid(format!(
                "nuclear norm {nuc} exceeds the radius {}",
                spec.radius()
            )));
        }
        Ok(Self { m, spec })
    }
}

/// The observed index set Ω.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    pub d1: usize,
    pub d2: usize,
    /// Row-major ordered cells.
    pub cells: Vec<(usize, usize)>,
}

impl ObservationMask {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Includes each cell independently with probability `m / (d1 d2)`.
pub fn sample_mask(d1: usize, d2: usize, m: f64, seed: u64) -> Result<ObservationMask> {
    if d1 == 0 || d2 == 0 {
        return Err(invalid(format!("dimensions must be positive, got {d1}x{d2}")));
    }
    let total = (d1 * d2) as f64;
    if !(m > 0.0 && m <= total) {
        return Err(invalid(format!("expected count m must lie in (0, {total}], got {m}")));
    }
    let p = m / total;
    let mut rng = rng_from_seed(seed);
    let mut cells = Vec::with_capacity(m.ceil() as usize);
    for i in 0..d1 {
        for j in 0..d2 {
            // Always draw so the stream position does not depend on p.
            let u: f64 = rng.random();
            if p >= 1.0 || u < p {
                cells.push((i, j));
            }
        }
    }
    Ok(ObservationMask { d1, d2, cells })
}

/// Draws `Y_ij = a_k` with probability `f_k(M_ij)` for every masked cell.
pub fn sample_observations(
    family: &LinkFamily,
    truth: &GroundTruth,
    mask: &ObservationMask,
    labels: &[f64],
    seed: u64,
) -> Result<ObservationSet> {
    sample_from_matrix(family, &truth.m, mask, labels, seed)
}

/// As [`sample_observations`] for an arbitrary matrix of link inputs.
pub fn sample_from_matrix(
    family: &LinkFamily,
    m: &Array2<f64>,
    mask: &ObservationMask,
    labels: &[f64],
    seed: u64,
) -> Result<ObservationSet> {
    validate_labels(labels)?;
    if labels.len() != family.k() {
        return Err(invalid(format!(
            "{} labels supplied for a family with K = {}",
            labels.len(),
            family.k()
        )));
    }
    if m.dim() != (mask.d1, mask.d2) {
        return Err(invalid(format!(
            "matrix is {:?} but the mask is {}x{}",
            m.dim(),
            mask.d1,
            mask.d2
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut entries = Vec::with_capacity(mask.len());
    for &(i, j) in &mask.cells {
        let probs = eval_probs(family, m[[i, j]])?;
        let u: f64 = rng.random();
        entries.push(Observation {
            row: i,
            col: j,
            category: draw_category(&probs, u),
        });
    }
    ObservationSet::new(mask.d1, mask.d2, labels.to_vec(), entries)
}

/// Inverse-CDF draw; never returns a zero-probability category.
pub fn draw_category(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = k;
        acc += p;
        if u < acc {
            return k;
        }
    }
    last_positive
}

/// Rank-`r` ground truth `A Bᵀ` with standard normal factors, rescaled so that
/// `max |M_ij| = 0.95 α`.
pub fn synth_low_rank(d1: usize, d2: usize, r: usize, alpha: f64, seed: u64) -> Result<GroundTruth> {
    let spec = ConstraintSpec::new(alpha, r, d1, d2)?;
    let mut rng = rng_from_seed(seed);
    let a = Array2::from_shape_simple_fn((d1, r), || rng.sample::<f64, _>(StandardNormal));
    let b = Array2::from_shape_simple_fn((d2, r), || rng.sample::<f64, _>(StandardNormal));
    let mut m = a.dot(&b.t());
    let peak = max_abs(&m);
    if peak == 0.0 {
        return Err(crate::error::Error::Numeric("sampled factors produced a zero matrix".into()));
    }
    m *= 0.95 * alpha / peak;
    GroundTruth::new(m, spec)
}
