//! Dense-matrix helpers. Matrices are `ndarray::Array2<f64>` throughout the
//! crate; singular value decompositions are delegated to `faer`.

use faer::{Mat, MatRef};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Thin SVD `A = U diag(s) Vᵀ`.
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn to_faer(a: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_faer(m: MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn thin_svd(a: &Array2<f64>) -> Result<Svd> {
    if a.is_empty() {
        return Err(Error::InvalidInput("SVD of an empty matrix".into()));
    }
    let m = to_faer(a);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD of {}x{} matrix failed: {e:?}", a.nrows(), a.ncols())))?;
    let s = svd.S().column_vector().iter().copied().collect();
    Ok(Svd {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    })
}

pub fn singular_values(a: &Array2<f64>) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(a).singular_values().map_err(|e| {
        Error::Numeric(format!(
            "singular values of {}x{} matrix failed: {e:?}",
            a.nrows(),
            a.ncols()
        ))
    })
}

/// Sum of singular values.
pub fn nuclear_norm(a: &Array2<f64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `U diag(sigma) Vᵀ`, skipping zero singular values.
pub fn reconstruct(svd: &Svd, sigma: &[f64]) -> Array2<f64> {
    let keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > 0.0).collect();
    let (rows, cols) = (svd.u.nrows(), svd.v.nrows());
    if keep.is_empty() {
        return Array2::zeros((rows, cols));
    }
    let us = Mat::from_fn(rows, keep.len(), |i, c| svd.u[(i, keep[c])] * sigma[keep[c]]);
    let vk = Mat::from_fn(cols, keep.len(), |j, c| svd.v[(j, keep[c])]);
    let prod = &us * vk.transpose();
    from_faer(prod.as_ref())
}
