//! Optimality residual of the block-regularized problem.
//!
//! With `Z = −(1/d)Xᵀ(XΘ − Y)` the stationarity condition is `Z ∈ λ ∂‖Θ‖_block`.
//! Block by block:
//! * zero block: `‖Z^{(i,j)}‖₁ ≤ λ`, residual `max(0, ‖Z‖₁ − λ)`;
//! * nonzero block: `Z` must vanish off the argmax set `M` of `|Θ^{(i,j)}|`
//!   and `sign(Θ_kl) Z_kl` on `M` must lie on the simplex of mass `λ`;
//!   residual is the Euclidean distance to that set.
//!
//! The reported value is the maximum over blocks. For `λ = 0` it is the
//! max-abs gradient entry.

use nalgebra::{DMatrix, DMatrixView};

use super::{prox::project_simplex, Group, Moments};
use crate::blockstruct::{BlockPartition, BlockSupport};
use crate::error::Result;
use crate::lti::TrajectoryBatch;

/// Entries within this relative distance of the block maximum are treated
/// as attaining it.
const ARGMAX_REL_TOL: f64 = 1e-9;

pub fn kkt_residual(
    theta: &DMatrix<f64>,
    batch: &TrajectoryBatch,
    partition: &BlockPartition,
    lambda_d: f64,
) -> Result<f64> {
    batch.check_partition(partition)?;
    partition.check_grid(theta, "kkt_residual")?;
    let moments = Moments::new(batch);
    Ok(residual_from_moments(theta, &moments, partition, lambda_d, None))
}

pub(crate) fn residual_from_moments(
    theta: &DMatrix<f64>,
    moments: &Moments,
    partition: &BlockPartition,
    lambda_d: f64,
    free: Option<&BlockSupport>,
) -> f64 {
    let grad = &moments.gram * theta - &moments.cross;
    let all: Vec<usize> = (0..partition.n_col_blocks()).collect();
    let group = Group::new(partition, &all, free);
    group_residual(&group, theta, &grad, lambda_d)
}

pub(crate) fn group_residual(
    group: &Group<'_>,
    x: &DMatrix<f64>,
    grad: &DMatrix<f64>,
    lambda: f64,
) -> f64 {
    if lambda == 0.0 {
        let mut worst = 0.0f64;
        for (k, cols) in group.local.iter().enumerate() {
            for i in 0..group.partition.n_row_blocks() {
                if !group.is_free(i, k) {
                    continue;
                }
                let rows = group.partition.row_range(i);
                let g = grad.view((rows.start, cols.start), (rows.len(), cols.len()));
                worst = worst.max(g.amax());
            }
        }
        return worst;
    }
    let mut worst = 0.0f64;
    for (k, cols) in group.local.iter().enumerate() {
        for i in 0..group.partition.n_row_blocks() {
            if !group.is_free(i, k) {
                continue;
            }
            let rows = group.partition.row_range(i);
            let shape = (rows.len(), cols.len());
            let xb = x.view((rows.start, cols.start), shape);
            let gb = grad.view((rows.start, cols.start), shape);
            worst = worst.max(block_residual(xb, gb, lambda));
        }
    }
    worst
}

fn block_residual(x: DMatrixView<'_, f64>, grad: DMatrixView<'_, f64>, lambda: f64) -> f64 {
    let peak = x.amax();
    if peak == 0.0 {
        let l1: f64 = grad.iter().map(|g| g.abs()).sum();
        return (l1 - lambda).max(0.0);
    }
    let cutoff = peak * (1.0 - ARGMAX_REL_TOL);
    let mut off = 0.0;
    let mut on = Vec::new();
    for (&xv, &gv) in x.iter().zip(grad.iter()) {
        let z = -gv;
        if xv.abs() >= cutoff {
            on.push(z * xv.signum());
        } else {
            off += z * z;
        }
    }
    let proj = project_simplex(&on, lambda);
    let dist_on: f64 = on.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum();
    (off + dist_on).sqrt()
}

/// Nearest element of `∂‖x‖_∞` (scaled by `λ`) to `z`: the valid subgradient
/// used to complete a dual witness for a block of the restricted solution.
pub(crate) fn nearest_subgradient(x: &[f64], z: &[f64], lambda: f64) -> Vec<f64> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        let l1: f64 = z.iter().map(|v| v.abs()).sum();
        if l1 <= lambda {
            return z.to_vec();
        }
        return super::prox::project_l1_ball(z, lambda).unwrap_or_else(|_| vec![0.0; z.len()]);
    }
    let cutoff = peak * (1.0 - ARGMAX_REL_TOL);
    let idx: Vec<usize> = (0..x.len()).filter(|&k| x[k].abs() >= cutoff).collect();
    let on: Vec<f64> = idx.iter().map(|&k| z[k] * x[k].signum()).collect();
    let weights = project_simplex(&on, lambda);
    let mut out = vec![0.0; x.len()];
    for (w, &k) in weights.iter().zip(&idx) {
        out[k] = w * x[k].signum();
    }
    out
}
