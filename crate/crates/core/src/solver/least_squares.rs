use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::TrajectoryBatch;

/// Relative pivot size of the QR factor below which `X` is rank deficient.
const RANK_TOL: f64 = 1e-12;

/// `Θ_ls = (XᵀX)⁻¹XᵀY`, computed from a QR factorization of `X`.
///
/// Undefined unless `d ≥ n+m` and `X` has full column rank.
pub fn solve_least_squares(batch: &TrajectoryBatch) -> Result<DMatrix<f64>> {
    let (d, p) = batch.x.shape();
    if d < p {
        return Err(Error::LsUndefined(format!(
            "d = {d} trajectories is below the dimension n+m = {p}"
        )));
    }
    if batch.x.iter().chain(batch.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trajectory batch"));
    }
    let qr = batch.x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let diag_min = r.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if p > 0 && (diag_max == 0.0 || diag_min <= RANK_TOL * diag_max) {
        return Err(Error::LsUndefined("XᵀX is singular".into()));
    }
    let qty = qr.q().transpose() * &batch.y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::LsUndefined("triangular solve failed".into()))
}
