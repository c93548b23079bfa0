//! Euclidean projection onto the ℓ1 ball and the ℓ∞ proximal operator.

use crate::error::{Error, Result};

/// Soft-threshold level `θ` such that `Σ max(|v_i| − θ, 0) = radius`,
/// assuming `Σ |v_i| > radius > 0`. Magnitudes are sorted in decreasing
/// order with ties broken by index.
pub(crate) fn l1_threshold(v: &[f64], radius: f64) -> f64 {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    simplex_level(order.iter().map(|&i| v[i].abs()), radius)
}

/// Threshold for projecting a nonnegative vector, given in decreasing order,
/// onto the simplex of mass `radius`.
fn simplex_level(sorted_desc: impl Iterator<Item = f64>, radius: f64) -> f64 {
    let mut cumsum = 0.0;
    let mut level = 0.0;
    for (k, u) in sorted_desc.enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if u - candidate > 0.0 {
            level = candidate;
        } else {
            break;
        }
    }
    level
}

/// Projects `v` onto `{z : Σ|z_i| ≤ radius}`.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "l1-ball radius must be positive, got {radius}"
        )));
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return Ok(v.to_vec());
    }
    let theta = l1_threshold(v, radius);
    Ok(v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect())
}

/// Projects a vector onto `{s ≥ 0, Σ s = radius}`.
pub(crate) fn project_simplex(s: &[f64], radius: f64) -> Vec<f64> {
    let mut sorted = s.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let theta = simplex_level(sorted.into_iter(), radius);
    s.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `argmin_x ½‖x − v‖² + τ·max_i |x_i|`, computed as
/// `v − project_l1_ball(v, τ)`. The result is exactly zero iff `‖v‖₁ ≤ τ`.
pub fn prox_linf(v: &[f64], tau: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    prox_linf_in_place(&mut out, tau);
    out
}

pub(crate) fn prox_linf_in_place(v: &mut [f64], tau: f64) {
    if tau <= 0.0 {
        return;
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= tau {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let theta = l1_threshold(v, tau);
    for x in v.iter_mut() {
        let p = x.signum() * (x.abs() - theta).max(0.0);
        *x -= p;
    }
}
