#![allow(dead_code)]

use catmc::linalg::{max_abs, nuclear_norm};
use catmc::sampling::{default_labels, rng_from_seed, Observation, SampleRng};
use catmc::solver::{project_box, project_nuclear_ball, Estimate, Objective};
use catmc::{ConstraintSpec, MultinomialLogitFamily, ObservationSet};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

pub fn rng(seed: u64) -> SampleRng {
    rng_from_seed(seed)
}

pub fn normal_matrix(rng: &mut SampleRng, d1: usize, d2: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((d1, d2), || scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform_matrix(rng: &mut SampleRng, d1: usize, d2: usize, half_width: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((d1, d2), || half_width * (2.0 * rng.random::<f64>() - 1.0))
}

pub fn dirichlet(rng: &mut SampleRng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

pub fn random_family(rng: &mut SampleRng, k: usize) -> MultinomialLogitFamily {
    let alphas = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let betas = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
    MultinomialLogitFamily::new(alphas, betas).unwrap()
}

/// Each cell observed with probability `p`; categories uniform at random.
pub fn random_obs(rng: &mut SampleRng, d1: usize, d2: usize, k: usize, p: f64) -> ObservationSet {
    let mut entries = Vec::new();
    for row in 0..d1 {
        for col in 0..d2 {
            if rng.random::<f64>() < p {
                let category = rng.random_range(0..k);
                entries.push(Observation { row, col, category });
            }
        }
    }
    ObservationSet::new(d1, d2, default_labels(k), entries).unwrap()
}

/// `log f_k(x)` straight from the definition, without log-sum-exp.
pub fn naive_log_prob(family: &MultinomialLogitFamily, k: usize, x: f64) -> f64 {
    let w: Vec<f64> = (0..family.k())
        .map(|j| (family.alphas()[j] + family.betas()[j] * x).exp())
        .collect();
    (w[k] / w.iter().sum::<f64>()).ln()
}

/// Central difference of `f` with respect to entry `(i, j)`.
pub fn central_difference(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>, i: usize, j: usize, h: f64) -> f64 {
    let mut plus = x.clone();
    plus[[i, j]] += h;
    let mut minus = x.clone();
    minus[[i, j]] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// High-precision projection onto the constraint set by ADMM on the split
/// `Z ∈ box`, `W ∈ nuclear ball`, `Z = W`.
pub fn admm_projection(x: &Array2<f64>, spec: &ConstraintSpec, iters: usize) -> Array2<f64> {
    let rho = 1.0;
    let radius = spec.radius();
    let mut w = x.clone();
    let mut u = Array2::<f64>::zeros(x.dim());
    let mut z = x.clone();
    for _ in 0..iters {
        z = project_box(&((x + &((&w - &u) * rho)) / (1.0 + rho)), spec.alpha);
        w = project_nuclear_ball(&(&z + &u), radius).unwrap();
        u = &u + &z - &w;
    }
    z
}

/// Largest violation of the projection optimality condition
/// `⟨X − Z, Y − Z⟩ ≤ 0` over random feasible `Y`, normalized by `‖Y − Z‖`.
pub fn variational_violation(
    x: &Array2<f64>,
    z: &Array2<f64>,
    spec: &ConstraintSpec,
    rng: &mut SampleRng,
    trials: usize,
) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut y = uniform_matrix(rng, spec.d1, spec.d2, spec.alpha);
        let nuc = nuclear_norm(&y).unwrap();
        if nuc > spec.radius() {
            y *= spec.radius() / nuc;
        }
        let d = &y - z;
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            worst = worst.max(((x - z) * &d).sum() / norm);
        }
    }
    worst
}

/// Ascent and feasibility contracts every solver result must satisfy.
pub fn assert_estimate_contract(est: &Estimate, spec: &ConstraintSpec) {
    for w in est.trace.windows(2) {
        assert!(w[1] >= w[0], "trace decreased: {} -> {}", w[0], w[1]);
    }
    assert!(est.nuclear_residual <= 1e-6 * spec.radius(), "nuclear residual {}", est.nuclear_residual);
    assert!(est.box_residual <= 1e-9, "box residual {}", est.box_residual);
    assert!(max_abs(&est.x) <= spec.alpha + 1e-9);
    assert!(nuclear_norm(&est.x).unwrap() <= spec.radius() * (1.0 + 1e-6));
    assert_eq!(est.trace.len(), est.iters + 1);
}

/// One-bit likelihood `Σ y log σ(a + b x) + (1 − y) log σ(−a − b x)` where
/// `y = 1` for the first category.
pub struct OneBit<'a> {
    pub a: f64,
    pub b: f64,
    pub obs: &'a ObservationSet,
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Objective for OneBit<'_> {
    fn value(&self, x: &Array2<f64>) -> f64 {
        self.obs
            .entries()
            .iter()
            .map(|o| {
                let z = self.a + self.b * x[[o.row, o.col]];
                if o.category == 0 {
                    log_sigmoid(z)
                } else {
                    log_sigmoid(-z)
                }
            })
            .sum()
    }

    fn gradient(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(x.dim());
        for o in self.obs.entries() {
            let z = self.a + self.b * x[[o.row, o.col]];
            let y = if o.category == 0 { 1.0 } else { 0.0 };
            g[[o.row, o.col]] += self.b * (y - sigmoid(z));
        }
        g
    }
}

pub fn mse(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            total += (a[[i, j]] - b[[i, j]]).powi(2);
        }
    }
    total / (a.len() as f64)
}
