//! Identification of sparse block-structured linear time-invariant systems.
//!
//! The parameter `Θ = [A B]ᵀ` of `x[t+1] = A x[t] + B u[t] + w[t]` is
//! estimated from the last transition of `d` independent trajectories by
//! least squares with a sum-of-block-ℓ∞ penalty.
//!
//! * [`blockstruct`]: block partitions, block norms and support masks.
//! * [`lti`]: models, generators, trajectory simulation and the analytic
//!   design covariance.
//! * [`solver`]: the regularized estimator, least squares, optimality
//!   residuals and the dual witness check.
//! * [`theory`]: incoherence, the regularization schedule and sample bounds.
//! * [`metrics`]: support mismatch and error norms.
//! * [`experiment`]: seeded sweeps written as CSV.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockstruct;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod lti;
pub mod metrics;
pub mod solver;
pub mod theory;

pub use blockstruct::{block_norm_sum, support_pattern, BlockPartition, BlockSupport};
pub use error::{Error, Result};
pub use lti::{
    design_covariance, gen_mass_spring, gen_multi_agent, gen_synthetic, horizon_condition_number,
    simulate_batch, SystemModel, TrajectoryBatch,
};
pub use solver::{
    kkt_residual, pdw_check, solve_block_regularized, solve_least_squares, EstimateResult,
    EstimatorConfig,
};
