//! Recovery conditions, the regularization schedule and sample-count
//! thresholds.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::blockstruct::{block_max_abs, support_pattern, BlockPartition, BlockSupport};
use crate::error::{Error, Result};
use crate::linalg::SINGULAR_REL_TOL;
use crate::lti::{design_covariance, SystemModel};

/// Incoherence margin
///
/// `γ = 1 − max_j max_{i ∈ A_j^c} ‖Σ̃_{(i),A_j} Σ̃_{A_j,A_j}⁻¹‖₁`
///
/// where `‖·‖₁` is the entrywise ℓ1 norm. A column block with no
/// off-support rows, or with an empty support, contributes 0 to the max.
pub fn mutual_incoherence(
    sigma_tilde: &DMatrix<f64>,
    partition: &BlockPartition,
    support: &BlockSupport,
) -> Result<f64> {
    let p = partition.dim();
    if sigma_tilde.shape() != (p, p) {
        return Err(Error::Shape {
            context: "mutual_incoherence covariance",
            expected: (p, p),
            found: sigma_tilde.shape(),
        });
    }
    let expected = (partition.n_row_blocks(), partition.n_col_blocks());
    if support.shape() != expected {
        return Err(Error::Shape {
            context: "mutual_incoherence support",
            expected,
            found: support.shape(),
        });
    }
    let scale = sigma_tilde.diagonal().amax();
    let mut worst = 0.0f64;
    for j in 0..partition.n_col_blocks() {
        let active = support.active_rows(j);
        let inactive = support.inactive_rows(j);
        if active.is_empty() || inactive.is_empty() {
            continue;
        }
        let ia: Vec<usize> = active.iter().flat_map(|&i| partition.row_range(i)).collect();
        let ic: Vec<usize> = inactive.iter().flat_map(|&i| partition.row_range(i)).collect();
        let saa = DMatrix::from_fn(ia.len(), ia.len(), |r, c| sigma_tilde[(ia[r], ia[c])]);
        let sac = DMatrix::from_fn(ia.len(), ic.len(), |r, c| sigma_tilde[(ia[r], ic[c])]);
        let chol = saa.cholesky().ok_or_else(|| {
            Error::IncoherenceUndefined(format!(
                "on-support covariance of column block {j} is singular"
            ))
        })?;
        let pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if pivot * pivot <= SINGULAR_REL_TOL * scale {
            return Err(Error::IncoherenceUndefined(format!(
                "on-support covariance of column block {j} is singular"
            )));
        }
        // columns of Σ_AA⁻¹ Σ_{A,A^c} are rows of Σ_{A^c,A} Σ_AA⁻¹
        let r = chol.solve(&sac);
        let mut offset = 0;
        for &i in &inactive {
            let h = partition.row_range(i).len();
            let norm: f64 = r.columns(offset, h).iter().map(|v| v.abs()).sum();
            worst = worst.max(norm);
            offset += h;
        }
    }
    Ok(1.0 - worst)
}

/// Smallest max-abs entry over the nonzero blocks of `Θ*`.
pub fn min_block_magnitude(theta_star: &DMatrix<f64>, partition: &BlockPartition) -> Result<f64> {
    partition.check_grid(theta_star, "min_block_magnitude")?;
    let mut t_min = f64::INFINITY;
    for j in 0..partition.n_col_blocks() {
        for i in 0..partition.n_row_blocks() {
            let m = block_max_abs(theta_star, partition, i, j);
            if m > 0.0 {
                t_min = t_min.min(m);
            }
        }
    }
    if t_min.is_finite() {
        Ok(t_min)
    } else {
        Err(Error::TminUndefined)
    }
}

/// Regularization weight used for every experiment:
/// `λ_d = sqrt(2 (D² + D log(n̄+m̄)) / d)`.
pub fn lambda_schedule(block_size: usize, n_bar: usize, m_bar: usize, d: usize) -> f64 {
    let dd = block_size as f64;
    let blocks = (n_bar + m_bar) as f64;
    (2.0 * (dd * dd + dd * blocks.ln()) / d as f64).sqrt()
}

/// [`lambda_schedule`] with `D`, `n̄` and `m̄` read off a partition.
pub fn lambda_for(partition: &BlockPartition, d: usize) -> f64 {
    lambda_schedule(
        partition.max_block_size(),
        partition.n_state_blocks(),
        partition.n_input_blocks(),
        d,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SparsityMeasure {
    /// Linear in `k_max`.
    Columns,
    /// Quadratic in `k_max`, for sparsity counted over distinct rows and
    /// columns.
    RowsAndColumns,
}

/// Inputs of the sample-count threshold
/// `d_min = ⌈c · κ² · k · (D log(n̄+m̄) + D² log(1/δ))⌉`
/// with `k = k_max` or `k_max²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleThreshold {
    pub kappa: f64,
    pub k_max: usize,
    pub block_size: usize,
    pub n_bar: usize,
    pub m_bar: usize,
    pub delta: f64,
    pub c_mult: f64,
    pub measure: SparsityMeasure,
}

impl SampleThreshold {
    /// The threshold before rounding up.
    pub fn raw(&self) -> Result<f64> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "failure probability must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.kappa > 0.0) || !(self.c_mult > 0.0) || self.k_max == 0 || self.block_size == 0 {
            return Err(Error::InvalidArgument(
                "kappa, c_mult, k_max and block size must be positive".into(),
            ));
        }
        let dd = self.block_size as f64;
        let k = self.k_max as f64;
        let k = match self.measure {
            SparsityMeasure::Columns => k,
            SparsityMeasure::RowsAndColumns => k * k,
        };
        let blocks = (self.n_bar + self.m_bar) as f64;
        Ok(self.c_mult
            * self.kappa
            * self.kappa
            * k
            * (dd * blocks.ln() + dd * dd * (1.0 / self.delta).ln()))
    }

    pub fn d_min(&self) -> Result<u64> {
        Ok(self.raw()?.ceil() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AssumptionFlags {
    pub incoherence: bool,
    pub bounded_eigenvalue: bool,
    pub min_magnitude: bool,
}

/// Diagnostics of the recovery conditions for one model and horizon.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub sigma_max_sq: f64,
    pub t_min: f64,
    /// `log n_max / log(n̄+m̄)`, informational.
    pub alpha_n: f64,
    /// `log m_max / log(n̄+m̄)`, informational.
    pub alpha_m: f64,
    pub k_max: usize,
    pub block_size: usize,
    pub satisfied: AssumptionFlags,
}

impl AssumptionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn size_exponent(size: usize, blocks: usize) -> f64 {
    if blocks <= 1 || size == 0 {
        0.0
    } else {
        (size as f64).ln() / (blocks as f64).ln()
    }
}

pub fn check_assumptions(model: &SystemModel, horizon: usize) -> Result<AssumptionReport> {
    let cov = design_covariance(model, horizon)?;
    let partition = model.partition();
    let theta = model.theta();
    let support = support_pattern(&theta, partition, 0.0)?;
    let t_min = min_block_magnitude(&theta, partition)?;
    let gamma = mutual_incoherence(&cov.sigma_tilde, partition, &support)?;
    let blocks = partition.n_row_blocks();
    Ok(AssumptionReport {
        gamma,
        lambda_min: cov.lambda_min,
        lambda_max: cov.lambda_max,
        kappa: cov.kappa,
        sigma_max_sq: cov.sigma_max_sq,
        t_min,
        alpha_n: size_exponent(partition.n_max(), blocks),
        alpha_m: size_exponent(partition.m_max(), blocks),
        k_max: support.k_max(),
        block_size: partition.max_block_size(),
        satisfied: AssumptionFlags {
            incoherence: gamma > 0.0,
            bounded_eigenvalue: cov.lambda_min > SINGULAR_REL_TOL * cov.lambda_max,
            min_magnitude: t_min > 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::gen_synthetic;

    #[test]
    fn incoherence_diagonal_covariance() {
        let p = BlockPartition::unit(3, 2).unwrap();
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 0.5, 1.0]));
        let mut s = BlockSupport::for_partition(&p);
        s.set(0, 0, true);
        s.set(3, 1, true);
        s.set(4, 2, true);
        assert_eq!(mutual_incoherence(&sigma, &p, &s).unwrap(), 1.0);
    }

    #[test]
    fn incoherence_two_by_two() {
        let p = BlockPartition::from_sizes(vec![1, 1], vec![1]).unwrap();
        let rho = 0.3;
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let s = BlockSupport::from_rows(&[vec![true], vec![false]]).unwrap();
        let gamma = mutual_incoherence(&sigma, &p, &s).unwrap();
        assert!((gamma - 0.7).abs() < 1e-15);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, -0.6, -0.6, 1.0]);
        assert!((mutual_incoherence(&sigma, &p, &s).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn incoherence_full_support_is_vacuous() {
        let p = BlockPartition::from_sizes(vec![1, 1], vec![1]).unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let s = BlockSupport::full(2, 1);
        assert_eq!(mutual_incoherence(&sigma, &p, &s).unwrap(), 1.0);
    }

    #[test]
    fn incoherence_singular_support() {
        let p = BlockPartition::from_sizes(vec![1, 1, 1], vec![1]).unwrap();
        let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let s = BlockSupport::from_rows(&[vec![true], vec![true], vec![false]]).unwrap();
        assert!(matches!(
            mutual_incoherence(&sigma, &p, &s),
            Err(Error::IncoherenceUndefined(_))
        ));
    }

    #[test]
    fn incoherence_scale_invariant() {
        let model = gen_synthetic(10, 1, 3).unwrap();
        let cov = design_covariance(&model, 3).unwrap();
        let s = support_pattern(&model.theta(), model.partition(), 0.0).unwrap();
        let g1 = mutual_incoherence(&cov.sigma_tilde, model.partition(), &s).unwrap();
        let g2 = mutual_incoherence(&(&cov.sigma_tilde * 7.5), model.partition(), &s).unwrap();
        assert!((g1 - g2).abs() < 1e-12);
    }

    #[test]
    fn min_magnitude_cases() {
        let p = BlockPartition::from_sizes(vec![1], vec![1]).unwrap();
        assert_eq!(min_block_magnitude(&DMatrix::from_element(1, 1, 5.0), &p).unwrap(), 5.0);
        let p = BlockPartition::from_sizes(vec![1, 1, 1], vec![1]).unwrap();
        let t = DMatrix::from_column_slice(3, 1, &[1.0, -0.3, 0.7]);
        assert_eq!(min_block_magnitude(&t, &p).unwrap(), 0.3);
        assert!(matches!(
            min_block_magnitude(&DMatrix::zeros(3, 1), &p),
            Err(Error::TminUndefined)
        ));
        let model = gen_synthetic(12, 2, 1).unwrap();
        assert_eq!(min_block_magnitude(&model.theta(), model.partition()).unwrap(), 0.3);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_schedule(1, 1, 0, 2), 1.0);
        // sqrt(2 (1 + ln 200) / 360), evaluated independently
        let expected = 0.187_057_884_f64;
        assert!((lambda_schedule(1, 100, 100, 360) - expected).abs() < 1e-9);
        let a = lambda_schedule(4, 7, 3, 100);
        let b = lambda_schedule(4, 7, 3, 200);
        assert!((a / b - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lambda_monotone() {
        for d in 1..50 {
            assert!(lambda_schedule(3, 5, 5, d + 1) < lambda_schedule(3, 5, 5, d));
            assert!(lambda_schedule(4, 5, 5, d) > lambda_schedule(3, 5, 5, d));
            assert!(lambda_schedule(3, 6, 5, d) > lambda_schedule(3, 5, 5, d));
        }
        // unit blocks reduce to the element-wise form
        let (n, m, d) = (30usize, 20usize, 77usize);
        let elementwise = (2.0 * (1.0 + ((n + m) as f64).ln()) / d as f64).sqrt();
        assert!((lambda_schedule(1, n, m, d) - elementwise).abs() < 1e-15);
    }

    fn threshold(kappa: f64, k_max: usize, measure: SparsityMeasure) -> SampleThreshold {
        SampleThreshold {
            kappa,
            k_max,
            block_size: 1,
            n_bar: 2,
            m_bar: 1,
            delta: (-1.0f64).exp(),
            c_mult: 1.0,
            measure,
        }
    }

    #[test]
    fn sample_threshold_examples() {
        // ln 3 + ln e = 2.0986…
        let t = threshold(1.0, 1, SparsityMeasure::Columns);
        assert!((t.raw().unwrap() - (3f64.ln() + 1.0)).abs() < 1e-14);
        assert_eq!(t.d_min().unwrap(), 3);
        let doubled = threshold(2.0, 1, SparsityMeasure::Columns);
        assert!((doubled.raw().unwrap() / t.raw().unwrap() - 4.0).abs() < 1e-14);
        let lin = threshold(1.0, 3, SparsityMeasure::Columns).raw().unwrap();
        let quad = threshold(1.0, 3, SparsityMeasure::RowsAndColumns).raw().unwrap();
        assert!((quad / lin - 3.0).abs() < 1e-14);
        let mut bad = t;
        bad.delta = 1.0;
        assert!(bad.raw().is_err());
    }

    #[test]
    fn assumptions_closed_form() {
        let n = 4;
        let model = SystemModel::new(
            DMatrix::zeros(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n) * 0.5,
            BlockPartition::unit(n, n).unwrap(),
        )
        .unwrap();
        let rep = check_assumptions(&model, 2).unwrap();
        assert!((rep.lambda_min - 1.0).abs() < 1e-12);
        assert!((rep.lambda_max - 1.5).abs() < 1e-12);
        assert_eq!(rep.gamma, 1.0);
        assert!(rep.satisfied.incoherence && rep.satisfied.bounded_eigenvalue);
    }

    #[test]
    fn assumptions_synthetic_instance() {
        let model = gen_synthetic(10, 1, 1).unwrap();
        let rep = check_assumptions(&model, 3).unwrap();
        assert!(rep.gamma > 0.0, "gamma = {}", rep.gamma);
        assert_eq!(rep.t_min, 0.3);
        assert!(rep.to_json().unwrap().contains("\"gamma\""));
    }

    #[test]
    fn assumptions_zero_parameter() {
        let model = SystemModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(1, 1),
            DMatrix::identity(2, 2),
            BlockPartition::unit(2, 1).unwrap(),
        )
        .unwrap();
        assert!(matches!(check_assumptions(&model, 3), Err(Error::TminUndefined)));
    }
}
