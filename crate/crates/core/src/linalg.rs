//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute asymmetry allowed for covariance inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative eigenvalue threshold below which a PSD matrix counts as singular.
pub const SINGULAR_REL_TOL: f64 = 1e-10;

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `λ_max / λ_min`, or infinity when `λ_min ≤ 1e-10 · λ_max`.
pub fn condition_from_extremes(lo: f64, hi: f64) -> f64 {
    if hi <= 0.0 || lo <= SINGULAR_REL_TOL * hi {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.row_iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| i == j || v == 0.0))
}

/// Checks that `cov` is square, symmetric and PSD.
pub fn validate_covariance(cov: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if !cov.is_square() {
        return Err(Error::InvalidModel(format!("{name} must be square")));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(name));
    }
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidModel(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if is_diagonal(cov) {
        let min = cov.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
        if n > 0 && min < 0.0 {
            return Err(Error::NotPsd { name, min_eig: min });
        }
        return Ok(());
    }
    let (lo, hi) = eigen_extremes(cov);
    if lo < -SINGULAR_REL_TOL * hi.abs().max(1.0) {
        return Err(Error::NotPsd { name, min_eig: lo });
    }
    Ok(())
}

/// Symmetric square-root style factor `L` with `L Lᵀ = cov`, built from the
/// spectral decomposition so that singular covariances are allowed.
/// Diagonal covariances take a fast path.
pub fn psd_factor(cov: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    validate_covariance(cov, name)?;
    if is_diagonal(cov) {
        return Ok(DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt)));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let mut factor = eig.eigenvectors;
    for (mut col, s) in factor.column_iter_mut().zip(sqrt.iter()) {
        col *= *s;
    }
    Ok(factor)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn power_iteration(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment to coordinate axes
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919 % 97) as f64) / 97.0);
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let done = (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}
