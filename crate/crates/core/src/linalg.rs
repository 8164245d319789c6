//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SteeringError};

/// Symmetrize a square matrix in place: (A + Aᵀ)/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Symmetric PSD square root via eigendecomposition, clamping eigenvalues at `floor`.
pub fn sym_sqrt(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(a).symmetric_eigen();
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        *v = v.max(floor).sqrt();
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Symmetric inverse square root, clamping eigenvalues at `floor` before inversion.
pub fn sym_inv_sqrt(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(a).symmetric_eigen();
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        *v = 1.0 / v.max(floor).sqrt();
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric positive-definite matrix.
///
/// Uses Cholesky and escalates to a conditioning error when the reciprocal
/// condition number (ratio of extreme eigenvalues) drops below 1e-12.
pub fn spd_inverse(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(a);
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if max > 0.0 { min / max } else { -1.0 };
    if !(rcond > 1e-12) {
        return Err(SteeringError::IllConditioned { context, rcond });
    }
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or(SteeringError::IllConditioned { context, rcond })
}

/// Check symmetry within `tol` and positive definiteness (min eigenvalue > tol).
pub fn is_spd(a: &DMatrix<f64>, sym_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let asym = (a - a.transpose()).amax();
    if asym > sym_tol {
        return false;
    }
    match symmetrize(a).cholesky() {
        Some(_) => true,
        None => false,
    }
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetrize(a)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Quadratic form xᵀ A x.
pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (x.transpose() * a * x)[(0, 0)]
}

/// Log-sum-exp of a slice, safe against all-(-inf) inputs.
pub fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = vals.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}
