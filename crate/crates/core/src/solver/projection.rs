//! Euclidean projections onto the entry box, the nuclear-norm ball, and
//! their intersection.

use ndarray::Array2;

use crate::constraint::ConstraintSpec;
use crate::error::{invalid, Result};
use crate::linalg::{frobenius_norm, max_abs, nuclear_norm, reconstruct, thin_svd, Svd};

use super::SolverConfig;

/// Entrywise clamp to `[-α, α]`.
pub fn project_box(x: &Array2<f64>, alpha: f64) -> Array2<f64> {
    x.mapv(|v| v.clamp(-alpha, alpha))
}

/// Projection of a non-negative vector onto `{σ ≥ 0, Σσ ≤ radius}` by the
/// sort-and-threshold rule.
pub fn project_l1_ball_nonneg(v: &[f64], radius: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= radius {
        return clipped;
    }
    let mut sorted = clipped.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    clipped.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projection onto `{‖X‖_* ≤ radius}`: the singular values are projected onto
/// the scaled simplex and the matrix is reassembled.
pub fn project_nuclear_ball(x: &Array2<f64>, radius: f64) -> Result<Array2<f64>> {
    check_radius(radius)?;
    let svd = thin_svd(x)?;
    Ok(nuclear_from_svd(x, &svd, radius))
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid(format!("radius must be positive and finite, got {radius}")));
    }
    Ok(())
}

fn nuclear_from_svd(x: &Array2<f64>, svd: &Svd, radius: f64) -> Array2<f64> {
    if svd.s.iter().sum::<f64>() <= radius {
        return x.clone();
    }
    let sigma = project_l1_ball_nonneg(&svd.s, radius);
    reconstruct(svd, &sigma)
}

/// Result of projecting onto the constraint set.
#[derive(Debug, Clone)]
pub struct ConstraintProjection {
    pub matrix: Array2<f64>,
    /// Dykstra sweeps performed (0 when a single projection sufficed).
    pub sweeps: usize,
    /// False when Dykstra hit `dykstra_max` before meeting `dykstra_tol`.
    pub converged: bool,
}

/// Projection onto `S = {‖X‖_* ≤ α√(r d₁ d₂)} ∩ {|X_ij| ≤ α}`.
///
/// If projecting onto one set already lands in the other, that point is the
/// projection onto the intersection and is returned directly. Otherwise
/// Dykstra's algorithm alternates the two projections with correction terms.
/// The returned matrix always satisfies the box exactly; a final scaling
/// towards the origin (which lies in both sets) removes any residual
/// nuclear-norm excess left by a finite number of sweeps.
pub fn project_constraint_set(
    x: &Array2<f64>,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
) -> Result<ConstraintProjection> {
    project_constraint_set_warm(x, spec, cfg, &mut None)
}

/// Dykstra correction terms carried from one projection to the next.
///
/// Dykstra's method is block coordinate ascent on a dual problem, so it
/// converges to the exact projection from any starting corrections. Reusing
/// the corrections of a nearby point cuts the number of sweeps sharply.
#[derive(Debug, Clone)]
pub struct DykstraDuals {
    nuclear: Array2<f64>,
    boxed: Array2<f64>,
}

/// As [`project_constraint_set`], starting Dykstra from `warm` when present
/// and storing the final corrections back into it.
pub fn project_constraint_set_warm(
    x: &Array2<f64>,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
    warm: &mut Option<DykstraDuals>,
) -> Result<ConstraintProjection> {
    spec.validate()?;
    if x.dim() != (spec.d1, spec.d2) {
        return Err(invalid(format!(
            "matrix is {:?} but the constraint set is {}x{}",
            x.dim(),
            spec.d1,
            spec.d2
        )));
    }
    let (alpha, radius) = (spec.alpha, spec.radius());
    let done = |matrix| ConstraintProjection {
        matrix,
        sweeps: 0,
        converged: true,
    };

    let in_box = max_abs(x) <= alpha;
    if !in_box {
        let boxed = project_box(x, alpha);
        if nuclear_norm(&boxed)? <= radius {
            return Ok(done(boxed));
        }
    }
    let svd = thin_svd(x)?;
    if in_box && svd.s.iter().sum::<f64>() <= radius {
        return Ok(done(x.clone()));
    }
    let nuc = nuclear_from_svd(x, &svd, radius);
    if max_abs(&nuc) <= alpha {
        return Ok(done(nuc));
    }
    dykstra(x, nuc, spec, cfg, warm)
}

fn dykstra(
    x0: &Array2<f64>,
    first_nuclear: Array2<f64>,
    spec: &ConstraintSpec,
    cfg: &SolverConfig,
    warm: &mut Option<DykstraDuals>,
) -> Result<ConstraintProjection> {
    let (alpha, radius) = (spec.alpha, spec.radius());
    let cold = warm.is_none();
    // `x + p + q` stays equal to `x0` throughout.
    let (mut x, mut p, mut q) = match warm.take() {
        Some(d) => (x0 - &d.nuclear - &d.boxed, d.nuclear, d.boxed),
        None => (x0.clone(), Array2::zeros(x0.dim()), Array2::zeros(x0.dim())),
    };
    let mut y = first_nuclear;
    let mut sweeps = 0;
    let mut converged = false;
    loop {
        sweeps += 1;
        if sweeps > 1 || !cold {
            let shifted = &x + &p;
            y = project_nuclear_ball(&shifted, radius)?;
            p = shifted - &y;
        } else {
            p = &x - &y;
        }
        let shifted = &y + &q;
        let next = project_box(&shifted, alpha);
        q = shifted - &next;
        let change = frobenius_norm(&(&next - &x));
        x = next;
        if change < cfg.dykstra_tol {
            converged = true;
            break;
        }
        if sweeps >= cfg.dykstra_max {
            break;
        }
    }
    if !converged {
        log::warn!(
            "Dykstra projection stopped after {sweeps} sweeps without reaching tolerance {:e}",
            cfg.dykstra_tol
        );
    }
    *warm = Some(DykstraDuals { nuclear: p, boxed: q });
    let nuc = nuclear_norm(&x)?;
    if nuc > radius {
        x *= radius / nuc;
    }
    Ok(ConstraintProjection {
        matrix: x,
        sweeps,
        converged,
    })
}
