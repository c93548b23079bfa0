//! Block-regularized least squares
//!
//! ```text
//! Θ̂ = argmin_Θ (1/2d)‖Y − XΘ‖²_F + λ_d Σ_{i,j} ‖Θ^{(i,j)}‖_∞
//! ```
//!
//! The objective separates over column blocks of `Θ`, so each column block
//! is solved independently by accelerated proximal gradient with adaptive
//! restart. The ℓ∞ prox of every block is evaluated through the ℓ1-ball
//! projection, which yields exact zero blocks.

mod kkt;
mod least_squares;
mod pdw;
pub mod prox;

pub use kkt::kkt_residual;
pub use least_squares::solve_least_squares;
pub use pdw::{pdw_check, DualNorm, PdwReport};
pub use prox::{project_l1_ball, prox_linf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockstruct::{support_pattern, BlockPartition, BlockSupport, DEFAULT_ZERO_TOL};
use crate::error::{Error, Result};
use crate::linalg::power_iteration;
use crate::lti::{to_rows, TrajectoryBatch};

pub const DEFAULT_KKT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 50_000;
const POWER_ITERATIONS: usize = 50;
const POWER_TOL: f64 = 1e-10;
/// Safety factor on the power-iteration estimate, which approaches λ_max
/// from below.
const LIPSCHITZ_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Step `1/L` with `L` from power iteration on `XᵀX/d`; doubled if a
    /// sufficient-decrease check ever fails.
    #[default]
    FixedLipschitz,
    /// Start from a cheap lower estimate of `L` and double on failure.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub lambda_d: f64,
    pub max_iter: usize,
    pub kkt_tol: f64,
    pub zero_tol: f64,
    pub step_policy: StepPolicy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lambda_d: 0.0,
            max_iter: DEFAULT_MAX_ITER,
            kkt_tol: DEFAULT_KKT_TOL,
            zero_tol: DEFAULT_ZERO_TOL,
            step_policy: StepPolicy::FixedLipschitz,
        }
    }
}

impl EstimatorConfig {
    pub fn with_lambda(lambda_d: f64) -> Self {
        Self {
            lambda_d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_d >= 0.0) || !self.lambda_d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda_d must be finite and nonnegative, got {}",
                self.lambda_d
            )));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidArgument("kkt_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::InvalidArgument("zero_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta_hat: DMatrix<f64>,
    pub support: BlockSupport,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Iterations used by each column block.
    pub iterations: Vec<usize>,
    pub converged: bool,
}

#[derive(Serialize)]
struct EstimateFile<'a> {
    theta_hat: Vec<Vec<f64>>,
    support_mask: Vec<Vec<bool>>,
    lambda_d: Option<f64>,
    kkt_residual: Option<f64>,
    objective: Option<f64>,
    converged: Option<bool>,
    iterations: Option<&'a [usize]>,
}

impl EstimateResult {
    /// JSON document with row-major `theta_hat` and `support_mask`.
    pub fn to_json(&self, lambda_d: f64) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EstimateFile {
            theta_hat: to_rows(&self.theta_hat),
            support_mask: self.support.to_rows(),
            lambda_d: Some(lambda_d),
            kkt_residual: Some(self.kkt_residual),
            objective: Some(self.objective),
            converged: Some(self.converged),
            iterations: Some(&self.iterations),
        })?)
    }
}

/// Same layout for an unregularized estimate.
pub fn least_squares_json(
    theta: &DMatrix<f64>,
    partition: &BlockPartition,
    zero_tol: f64,
) -> Result<String> {
    let support = support_pattern(theta, partition, zero_tol)?;
    Ok(serde_json::to_string_pretty(&EstimateFile {
        theta_hat: to_rows(theta),
        support_mask: support.to_rows(),
        lambda_d: None,
        kkt_residual: None,
        objective: None,
        converged: None,
        iterations: None,
    })?)
}

/// Objective `(1/2d)‖Y − XΘ‖² + λ‖Θ‖_block`.
pub fn objective(
    theta: &DMatrix<f64>,
    batch: &TrajectoryBatch,
    partition: &BlockPartition,
    lambda_d: f64,
) -> Result<f64> {
    batch.check_partition(partition)?;
    let resid = &batch.y - &batch.x * theta;
    let fit = resid.norm_squared() / (2.0 * batch.d() as f64);
    Ok(fit + lambda_d * crate::blockstruct::block_norm_sum(theta, partition)?)
}

/// Sufficient statistics `G = XᵀX/d` and `C = XᵀY/d`.
pub(crate) struct Moments {
    pub gram: DMatrix<f64>,
    pub cross: DMatrix<f64>,
}

impl Moments {
    pub fn new(batch: &TrajectoryBatch) -> Self {
        let scale = 1.0 / batch.d() as f64;
        let xt = batch.x.transpose();
        let mut gram = &xt * &batch.x * scale;
        // exact symmetry
        for i in 0..gram.nrows() {
            for j in 0..i {
                let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let cross = &xt * &batch.y * scale;
        Self { gram, cross }
    }
}

fn check_inputs(batch: &TrajectoryBatch, partition: &BlockPartition) -> Result<()> {
    batch.check_partition(partition)?;
    if batch.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix X"));
    }
    if batch.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation matrix Y"));
    }
    Ok(())
}

/// Solves the block-regularized problem, one column block at a time.
pub fn solve_block_regularized(
    batch: &TrajectoryBatch,
    partition: &BlockPartition,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    solve_with_mask(batch, partition, config, None)
}

/// Solves with every column block treated as one coupled problem. Used to
/// cross-check the column-block decomposition.
pub fn solve_block_regularized_joint(
    batch: &TrajectoryBatch,
    partition: &BlockPartition,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    config.validate()?;
    check_inputs(batch, partition)?;
    let moments = Moments::new(batch);
    let lipschitz = lipschitz_estimate(&moments.gram, config.step_policy);
    let all: Vec<usize> = (0..partition.n_col_blocks()).collect();
    let sol = solve_column_group(&moments, partition, &all, None, config, lipschitz);
    let iterations = vec![sol.iterations; all.len()];
    finish(batch, partition, config, sol.theta, iterations, sol.converged, None)
}

/// Solves with blocks outside `free` (when given) pinned to zero.
pub(crate) fn solve_with_mask(
    batch: &TrajectoryBatch,
    partition: &BlockPartition,
    config: &EstimatorConfig,
    free: Option<&BlockSupport>,
) -> Result<EstimateResult> {
    config.validate()?;
    check_inputs(batch, partition)?;
    let moments = Moments::new(batch);
    let lipschitz = lipschitz_estimate(&moments.gram, config.step_policy);
    let solutions: Vec<GroupSolution> = (0..partition.n_col_blocks())
        .into_par_iter()
        .map(|j| solve_column_group(&moments, partition, &[j], free, config, lipschitz))
        .collect();
    let mut theta = DMatrix::zeros(partition.dim(), partition.n());
    let mut iterations = Vec::with_capacity(solutions.len());
    let mut converged = true;
    for (j, sol) in solutions.into_iter().enumerate() {
        let cols = partition.col_range(j);
        theta.columns_mut(cols.start, cols.len()).copy_from(&sol.theta);
        iterations.push(sol.iterations);
        converged &= sol.converged;
    }
    finish(batch, partition, config, theta, iterations, converged, free.map(|f| (&moments, f)))
}

fn finish(
    batch: &TrajectoryBatch,
    partition: &BlockPartition,
    config: &EstimatorConfig,
    mut theta: DMatrix<f64>,
    iterations: Vec<usize>,
    converged: bool,
    restricted: Option<(&Moments, &BlockSupport)>,
) -> Result<EstimateResult> {
    // blocks at rounding level are set to exact zeros
    let support = support_pattern(&theta, partition, config.zero_tol)?;
    for j in 0..partition.n_col_blocks() {
        for i in 0..partition.n_row_blocks() {
            if !support.get(i, j) {
                let (rr, cc) = partition.block_range(i, j)?;
                theta.view_mut((rr.start, cc.start), (rr.len(), cc.len())).fill(0.0);
            }
        }
    }
    let kkt_residual = match restricted {
        // a restricted problem is only judged on its free blocks
        Some((moments, free)) => {
            kkt::residual_from_moments(&theta, moments, partition, config.lambda_d, Some(free))
        }
        None => kkt_residual(&theta, batch, partition, config.lambda_d)?,
    };
    let objective = objective(&theta, batch, partition, config.lambda_d)?;
    Ok(EstimateResult {
        theta_hat: theta,
        support,
        objective,
        kkt_residual,
        iterations,
        converged: converged && kkt_residual <= config.kkt_tol,
    })
}

fn lipschitz_estimate(gram: &DMatrix<f64>, policy: StepPolicy) -> f64 {
    let l = match policy {
        StepPolicy::FixedLipschitz => {
            LIPSCHITZ_MARGIN * power_iteration(gram, POWER_ITERATIONS, POWER_TOL)
        }
        // trace/p never exceeds λ_max
        StepPolicy::Backtracking => gram.trace() / gram.nrows().max(1) as f64,
    };
    if l > 0.0 && l.is_finite() {
        l
    } else {
        1.0
    }
}

struct GroupSolution {
    theta: DMatrix<f64>,
    iterations: usize,
    converged: bool,
}

/// Scalar layout of a set of column blocks solved together.
pub(crate) struct Group<'a> {
    pub partition: &'a BlockPartition,
    pub col_blocks: &'a [usize],
    /// local column offset of each entry of `col_blocks`
    pub local: Vec<std::ops::Range<usize>>,
    pub free: Option<&'a BlockSupport>,
}

impl<'a> Group<'a> {
    pub fn new(
        partition: &'a BlockPartition,
        col_blocks: &'a [usize],
        free: Option<&'a BlockSupport>,
    ) -> Self {
        let mut local = Vec::with_capacity(col_blocks.len());
        let mut start = 0;
        for &j in col_blocks {
            let w = partition.col_sizes()[j];
            local.push(start..start + w);
            start += w;
        }
        Self {
            partition,
            col_blocks,
            local,
            free,
        }
    }

    pub fn width(&self) -> usize {
        self.local.last().map_or(0, |r| r.end)
    }

    pub fn is_free(&self, i: usize, k: usize) -> bool {
        self.free.is_none_or(|f| f.get(i, self.col_blocks[k]))
    }

    pub fn gather_cross(&self, cross: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(cross.nrows(), self.width());
        for (k, &j) in self.col_blocks.iter().enumerate() {
            let g = self.partition.col_range(j);
            c.columns_mut(self.local[k].start, g.len())
                .copy_from(&cross.columns(g.start, g.len()));
        }
        c
    }

    /// Applies the block prox with threshold `tau` in place; pinned blocks
    /// become zero.
    pub fn prox(&self, v: &mut DMatrix<f64>, tau: f64) {
        let mut buf = Vec::new();
        for (k, cols) in self.local.iter().enumerate() {
            for i in 0..self.partition.n_row_blocks() {
                let rows = self.partition.row_range(i);
                let mut block = v.view_mut((rows.start, cols.start), (rows.len(), cols.len()));
                if !self.is_free(i, k) {
                    block.fill(0.0);
                    continue;
                }
                buf.clear();
                buf.extend(block.iter().copied());
                prox::prox_linf_in_place(&mut buf, tau);
                for (dst, src) in block.iter_mut().zip(&buf) {
                    *dst = *src;
                }
            }
        }
    }
}

/// `G x`, skipping zero rows of `x`.
fn gram_times(gram: &DMatrix<f64>, x: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    out.fill(0.0);
    for r in 0..x.nrows() {
        let row = x.row(r);
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        let g = gram.column(r);
        for (c, &coef) in row.iter().enumerate() {
            if coef != 0.0 {
                out.column_mut(c).axpy(coef, &g, 1.0);
            }
        }
    }
}

/// Smooth part `½⟨x, Gx⟩ − ⟨c, x⟩` given `Gx`.
fn smooth_value(x: &DMatrix<f64>, gx: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    0.5 * x.dot(gx) - c.dot(x)
}

/// Accelerated proximal gradient with gradient-based adaptive restart.
fn solve_column_group(
    moments: &Moments,
    partition: &BlockPartition,
    col_blocks: &[usize],
    free: Option<&BlockSupport>,
    config: &EstimatorConfig,
    lipschitz: f64,
) -> GroupSolution {
    let group = Group::new(partition, col_blocks, free);
    let gram = &moments.gram;
    let c = group.gather_cross(&moments.cross);
    let (p, k) = (gram.nrows(), group.width());
    let lambda = config.lambda_d;
    let mut l = lipschitz;

    let mut x = DMatrix::zeros(p, k);
    let mut gx = DMatrix::zeros(p, k);
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut x_new = DMatrix::zeros(p, k);
    let mut gx_new = DMatrix::zeros(p, k);
    let mut t = 1.0f64;

    // the zero start may already be optimal
    let resid = kkt::group_residual(&group, &x, &(&gx - &c), lambda);
    if resid <= config.kkt_tol {
        return GroupSolution {
            theta: x,
            iterations: 0,
            converged: true,
        };
    }

    let mut iter = 0;
    while iter < config.max_iter {
        iter += 1;
        let grad_y = &gy - &c;
        let f_y = smooth_value(&y, &gy, &c);
        loop {
            x_new.copy_from(&y);
            let step = 1.0 / l;
            x_new.zip_apply(&grad_y, |v, g| *v -= step * g);
            group.prox(&mut x_new, lambda / l);
            gram_times(gram, &x_new, &mut gx_new);
            let diff = &x_new - &y;
            let bound = f_y + grad_y.dot(&diff) + 0.5 * l * diff.norm_squared();
            let f_new = smooth_value(&x_new, &gx_new, &c);
            if f_new <= bound + 1e-12 * (1.0 + f_y.abs()) {
                break;
            }
            l *= 2.0;
        }

        let resid = kkt::group_residual(&group, &x_new, &(&gx_new - &c), lambda);
        if resid <= config.kkt_tol {
            return GroupSolution {
                theta: x_new,
                iterations: iter,
                converged: true,
            };
        }

        let restart = (&y - &x_new).dot(&(&x_new - &x)) > 0.0;
        if restart {
            t = 1.0;
            y.copy_from(&x_new);
            gy.copy_from(&gx_new);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            t = t_next;
            y.copy_from(&x_new);
            y.zip_apply(&x, |v, o| *v = (1.0 + beta) * *v - beta * o);
            gy.copy_from(&gx_new);
            gy.zip_apply(&gx, |v, o| *v = (1.0 + beta) * *v - beta * o);
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut gx, &mut gx_new);
    }
    GroupSolution {
        theta: x,
        iterations: iter,
        converged: false,
    }
}
