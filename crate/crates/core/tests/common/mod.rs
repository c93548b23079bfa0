//! Reference implementations used by the integration tests. None of them
//! calls into the solver or prox code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysid_core::{BlockPartition, SystemModel};

/// Euclidean projection onto the ℓ1 ball by trying every candidate
/// support size and keeping the consistent threshold.
pub fn l1_ball_bruteforce(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut theta = f64::NAN;
    let mut partial = 0.0;
    for k in 0..a.len() {
        partial += a[k];
        let t = (partial - radius) / (k + 1) as f64;
        let next_ok = k + 1 == a.len() || a[k + 1] <= t;
        if a[k] > t && next_ok {
            theta = t;
            break;
        }
    }
    assert!(theta.is_finite(), "no consistent threshold");
    v.iter().map(|&x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

/// Largest violation of the optimality conditions of
/// `x = argmin ½‖z − v‖² + τ‖z‖∞`:
/// `x = 0` when `‖v‖₁ ≤ τ`; otherwise `r = v − x` is sign-consistent with
/// `x`, vanishes off the argmax set of `|x|` and has `‖r‖₁ = τ`.
pub fn prox_linf_violation(v: &[f64], x: &[f64], tau: f64) -> f64 {
    let l1: f64 = v.iter().map(|a| a.abs()).sum();
    let peak = x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if l1 <= tau {
        return peak;
    }
    let mut worst = 0.0f64;
    let mut r_l1 = 0.0;
    for (&vi, &xi) in v.iter().zip(x) {
        let r = vi - xi;
        r_l1 += r.abs();
        let on_max = xi.abs() >= peak * (1.0 - 1e-9);
        if !on_max || r * xi < 0.0 {
            worst = worst.max(r.abs());
        }
    }
    worst.max((r_l1 - tau).abs())
}

/// Cyclic coordinate descent for `min ½θᵀGθ − cᵀθ + λ‖θ‖₁`, run until no
/// coordinate moves by more than `tol`.
pub fn lasso_coordinate_descent(g: &DMatrix<f64>, c: &DVector<f64>, lambda: f64, tol: f64) -> DVector<f64> {
    let p = c.len();
    let mut theta = DVector::zeros(p);
    for _ in 0..1_000_000 {
        let mut moved = 0.0f64;
        for k in 0..p {
            let rho = c[k] - (g.row(k) * &theta)[0] + g[(k, k)] * theta[k];
            let new = rho.signum() * (rho.abs() - lambda).max(0.0) / g[(k, k)];
            moved = moved.max((new - theta[k]).abs());
            theta[k] = new;
        }
        if moved < tol {
            return theta;
        }
    }
    panic!("coordinate descent did not settle");
}

/// Random unit-block model with roughly half of the entries of `A` and `B`
/// populated, `Σu = I` and `Σw = 0.5 I`.
pub fn random_sparse_model(n: usize, m: usize, seed: u64) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows, cols| {
        DMatrix::from_fn(rows, cols, |_, _| {
            if rng.random_bool(0.5) {
                rng.random_range(-0.8..0.8)
            } else {
                0.0
            }
        })
    };
    let a = draw(n, n);
    let b = draw(n, m);
    SystemModel::new(
        a,
        b,
        DMatrix::identity(m, m),
        DMatrix::identity(n, n) * 0.5,
        BlockPartition::unit(n, m).unwrap(),
    )
    .unwrap()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
