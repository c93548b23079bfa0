//! Support-recovery and estimation-error metrics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::blockstruct::{BlockPartition, BlockSupport};
use crate::error::{Error, Result};

/// Number of false positives plus false negatives between two block masks.
pub fn mismatch_error(est: &BlockSupport, truth: &BlockSupport) -> Result<usize> {
    if est.shape() != truth.shape() {
        return Err(Error::Shape {
            context: "mismatch_error",
            expected: truth.shape(),
            found: est.shape(),
        });
    }
    Ok(est.iter().zip(truth.iter()).filter(|(a, b)| a != b).count())
}

/// Relative mismatch error: mismatches over the total block count.
pub fn rme(mismatch: usize, partition: &BlockPartition) -> f64 {
    mismatch as f64 / partition.total_blocks() as f64
}

/// Relative number of sample trajectories `d / (n + m)`.
pub fn rst(d: usize, n: usize, m: usize) -> f64 {
    d as f64 / (n + m) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub linf_elementwise: f64,
    pub op_norm: f64,
    pub frob: f64,
    /// `‖Θ̂ − Θ*‖₂ / ‖Θ*‖₂`
    pub normalized_2: f64,
}

pub(crate) fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().amax()
}

pub fn error_norms(theta_hat: &DMatrix<f64>, theta_star: &DMatrix<f64>) -> Result<ErrorReport> {
    if theta_hat.shape() != theta_star.shape() {
        return Err(Error::Shape {
            context: "error_norms",
            expected: theta_star.shape(),
            found: theta_hat.shape(),
        });
    }
    let diff = theta_hat - theta_star;
    let reference = operator_norm(theta_star);
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    let op_norm = operator_norm(&diff);
    Ok(ErrorReport {
        linf_elementwise: diff.amax(),
        op_norm,
        frob: diff.norm(),
        normalized_2: op_norm / reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn mask(rows: &[&[u8]]) -> BlockSupport {
        BlockSupport::from_rows(&rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn mismatch_examples() {
        let truth = mask(&[&[1, 0], &[0, 1], &[0, 0]]);
        assert_eq!(mismatch_error(&truth, &truth).unwrap(), 0);
        let all = BlockSupport::full(3, 2);
        assert_eq!(mismatch_error(&all, &truth).unwrap(), 4);
        let other = mask(&[&[0, 1], &[0, 0], &[1, 0]]);
        assert_eq!(mismatch_error(&other, &truth).unwrap(), 2 + 2);
        assert!(mismatch_error(&BlockSupport::full(2, 2), &truth).is_err());
    }

    #[test]
    fn rme_and_rst() {
        let p = BlockPartition::unit(100, 100).unwrap();
        assert_eq!(rme(0, &p), 0.0);
        assert!((rme(40, &p) - 0.002).abs() < 1e-15);
        assert_eq!(rme(p.total_blocks(), &p), 1.0);
        assert_eq!(rst(400, 100, 100), 2.0);
        assert_eq!(rst(0, 3, 4), 0.0);
        let masses = 30;
        assert!((3.0 * rst(150, 2 * masses, masses) - 3.0 * 150.0 / (3.0 * masses as f64)).abs() < 1e-15);
    }

    #[test]
    fn error_examples() {
        let star = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let zero = error_norms(&star, &star).unwrap();
        assert_eq!(zero.linf_elementwise, 0.0);
        assert_eq!(zero.op_norm, 0.0);
        assert_eq!(zero.frob, 0.0);

        let hat = &star + DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        let rep = error_norms(&hat, &star).unwrap();
        assert!((rep.op_norm - 4.0).abs() < 1e-12);
        assert!((rep.frob - 5.0).abs() < 1e-12);
        assert_eq!(rep.linf_elementwise, 4.0);

        let u = DVector::from_vec(vec![1.0, -2.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 4.0]);
        let star = DMatrix::from_element(3, 2, 1.0);
        let rep = error_norms(&(&star + &u * v.transpose()), &star).unwrap();
        assert!((rep.op_norm - 15.0).abs() < 1e-12);

        assert!(matches!(
            error_norms(&star, &DMatrix::zeros(3, 2)),
            Err(Error::ZeroReference)
        ));
    }

    fn masks() -> impl Strategy<Value = (BlockSupport, BlockSupport, BlockSupport)> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            let m = move || {
                proptest::collection::vec(any::<bool>(), r * c).prop_map(move |v| {
                    BlockSupport::from_rows(&v.chunks(c).map(<[bool]>::to_vec).collect::<Vec<_>>())
                        .unwrap()
                })
            };
            (m(), m(), m())
        })
    }

    proptest! {
        #[test]
        fn mismatch_is_a_metric((a, b, c) in masks()) {
            let ab = mismatch_error(&a, &b).unwrap();
            prop_assert_eq!(ab, mismatch_error(&b, &a).unwrap());
            let ac = mismatch_error(&a, &c).unwrap();
            let cb = mismatch_error(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb);
        }

        #[test]
        fn norm_ordering(
            (r, c, v) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), proptest::collection::vec(-3.0f64..3.0, r * c))
            })
        ) {
            let star = DMatrix::from_element(r, c, 1.0);
            let diff = DMatrix::from_vec(r, c, v);
            let rep = error_norms(&(&star + &diff), &star).unwrap();
            let rank = diff.clone().rank(1e-10).max(1) as f64;
            prop_assert!(rep.op_norm <= rep.frob + 1e-9);
            prop_assert!(rep.frob <= rank.sqrt() * rep.op_norm + 1e-9);
            prop_assert!(rep.linf_elementwise <= rep.op_norm + 1e-9);
        }
    }
}
