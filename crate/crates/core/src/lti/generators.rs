//! Benchmark system generators.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SystemModel;
use crate::blockstruct::BlockPartition;
use crate::error::{Error, Result};

const BAND_VALUE: f64 = 0.3;
const AGENT_LOW: f64 = 0.3;
const AGENT_HIGH: f64 = 0.4;
const INPUT_VARIANCE: f64 = 1.0;
const DISTURBANCE_VARIANCE: f64 = 0.5;

fn standard_noise(n: usize, m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::identity(m, m) * INPUT_VARIANCE,
        DMatrix::identity(n, n) * DISTURBANCE_VARIANCE,
    )
}

fn signed(rng: &mut ChaCha8Rng, magnitude: f64) -> f64 {
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Banded random system with `n` states and `n` inputs, unit blocks.
///
/// Both `A` and `B` have unit diagonals and `±0.3` entries on the first `w`
/// off-diagonals on each side. Each row of `A` additionally receives `w`
/// entries of `±0.3` at columns outside the band, chosen without
/// replacement.
pub fn gen_synthetic(n: usize, w: usize, seed: u64) -> Result<SystemModel> {
    if n < 2 * w + 1 {
        return Err(Error::Generator(format!(
            "n = {n} is smaller than the band width 2w+1 = {}",
            2 * w + 1
        )));
    }
    if n < 3 * w + 1 {
        return Err(Error::Generator(format!(
            "n = {n} leaves fewer than w = {w} off-band positions per row (need n ≥ 3w+1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::identity(n, n);
    let mut b = DMatrix::identity(n, n);
    for mat in [&mut a, &mut b] {
        for r in 0..n {
            for c in r.saturating_sub(w)..(r + w + 1).min(n) {
                if c != r {
                    mat[(r, c)] = signed(&mut rng, BAND_VALUE);
                }
            }
        }
    }
    if w > 0 {
        for r in 0..n {
            let outside: Vec<usize> = (0..n).filter(|&c| c.abs_diff(r) > w).collect();
            for k in sample(&mut rng, outside.len(), w) {
                a[(r, outside[k])] = signed(&mut rng, BAND_VALUE);
            }
        }
    }
    let (su, sw) = standard_noise(n, n);
    SystemModel::new(a, b, su, sw, BlockPartition::unit(n, n)?)
}

/// `masses` unit masses on a path of unit springs, forward-Euler discretized
/// with step `dt`. States are positions then velocities; inputs are forces.
pub fn gen_mass_spring(masses: usize, dt: f64) -> Result<SystemModel> {
    if masses == 0 {
        return Err(Error::Generator("need at least one mass".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Generator(format!("sampling time must be positive, got {dt}")));
    }
    let n = 2 * masses;
    let mut ac = DMatrix::zeros(n, n);
    for i in 0..masses {
        ac[(i, masses + i)] = 1.0;
        ac[(masses + i, i)] = -2.0;
        if i + 1 < masses {
            ac[(masses + i, i + 1)] = 1.0;
            ac[(masses + i + 1, i)] = 1.0;
        }
    }
    let mut bc = DMatrix::zeros(n, masses);
    for i in 0..masses {
        bc[(masses + i, i)] = 1.0;
    }
    let a = DMatrix::identity(n, n) + ac * dt;
    let b = bc * dt;
    let (su, sw) = standard_noise(n, masses);
    SystemModel::new(a, b, su, sw, BlockPartition::unit(n, masses)?)
}

/// Network of `agents` subsystems with `state_size` states and `input_size`
/// inputs each. Every agent is influenced by itself and by `degree` distinct
/// other agents drawn uniformly (directed), through both states and inputs.
/// Populated continuous-time entries are uniform on `±[0.3, 0.4]`; the model
/// is forward-Euler discretized with step `dt`.
pub fn gen_multi_agent(
    agents: usize,
    degree: usize,
    state_size: usize,
    input_size: usize,
    dt: f64,
    seed: u64,
) -> Result<SystemModel> {
    if agents == 0 || state_size == 0 || input_size == 0 {
        return Err(Error::Generator("agent count and block sizes must be positive".into()));
    }
    if degree >= agents {
        return Err(Error::Generator(format!(
            "degree {degree} must be smaller than the agent count {agents}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Generator(format!("sampling time must be positive, got {dt}")));
    }
    let (ns, ms) = (state_size, input_size);
    let (n, m) = (agents * ns, agents * ms);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ac = DMatrix::zeros(n, n);
    let mut bc = DMatrix::zeros(n, m);
    let draw = |rng: &mut ChaCha8Rng| {
        let mag = rng.random_range(AGENT_LOW..=AGENT_HIGH);
        signed(rng, mag)
    };
    for i in 0..agents {
        let mut linked = vec![i];
        linked.extend(
            sample(&mut rng, agents - 1, degree)
                .into_iter()
                .map(|k| if k >= i { k + 1 } else { k }),
        );
        linked.sort_unstable();
        for &j in &linked {
            for r in i * ns..(i + 1) * ns {
                for c in j * ns..(j + 1) * ns {
                    ac[(r, c)] = draw(&mut rng);
                }
                for c in j * ms..(j + 1) * ms {
                    bc[(r, c)] = draw(&mut rng);
                }
            }
        }
    }
    let a = DMatrix::identity(n, n) + ac * dt;
    let b = bc * dt;
    let (su, sw) = standard_noise(n, m);
    SystemModel::new(a, b, su, sw, BlockPartition::uniform(agents, ns, ms)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_row_counts_within_range() {
        for (n, w, seed) in [(20, 1, 0), (40, 2, 1), (60, 3, 2), (100, 2, 3)] {
            let model = gen_synthetic(n, w, seed).unwrap();
            for r in 0..n {
                let nnz = model.a().row(r).iter().chain(model.b().row(r).iter())
                    .filter(|&&v| v != 0.0)
                    .count();
                assert!((3 * w + 2..=5 * w + 2).contains(&nnz), "row {r}: {nnz}");
            }
        }
    }

    #[test]
    fn synthetic_entry_values() {
        let model = gen_synthetic(30, 2, 9).unwrap();
        for mat in [model.a(), model.b()] {
            for r in 0..30 {
                assert_eq!(mat[(r, r)], 1.0);
                for c in 0..30 {
                    let v = mat[(r, c)];
                    if r != c && v != 0.0 {
                        assert!(v == 0.3 || v == -0.3);
                    }
                }
            }
        }
        // extras only in A
        for r in 0..30 {
            for c in 0..30usize {
                if c.abs_diff(r) > 2 {
                    assert_eq!(model.b()[(r, c)], 0.0);
                }
            }
            let extras = (0..30usize).filter(|&c| c.abs_diff(r) > 2 && model.a()[(r, c)] != 0.0).count();
            assert_eq!(extras, 2);
        }
        assert_eq!(model.sigma_u(), &DMatrix::identity(30, 30));
        assert_eq!(model.sigma_w(), &(DMatrix::identity(30, 30) * 0.5));
    }

    #[test]
    fn synthetic_degenerate_band() {
        let model = gen_synthetic(5, 0, 1).unwrap();
        assert_eq!(model.a(), &DMatrix::identity(5, 5));
        assert_eq!(model.b(), &DMatrix::identity(5, 5));
    }

    #[test]
    fn synthetic_rejects_small_n() {
        assert!(gen_synthetic(4, 2, 0).is_err());
        assert!(gen_synthetic(6, 2, 0).is_err());
        assert!(gen_synthetic(7, 2, 0).is_ok());
    }

    #[test]
    fn synthetic_is_seeded() {
        assert_eq!(gen_synthetic(20, 2, 4).unwrap(), gen_synthetic(20, 2, 4).unwrap());
        assert_ne!(gen_synthetic(20, 2, 4).unwrap(), gen_synthetic(20, 2, 5).unwrap());
    }

    #[test]
    fn mass_spring_single_mass() {
        let model = gen_mass_spring(1, 0.2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.4, 1.0]);
        assert!((model.a() - a).abs().max() < 1e-15);
        assert_eq!(model.b(), &DMatrix::from_row_slice(2, 1, &[0.0, 0.2]));
    }

    #[test]
    fn mass_spring_stiffness_block() {
        let dt = 0.5;
        let model = gen_mass_spring(2, dt).unwrap();
        // lower-left block is dt * S with S = [[-2, 1], [1, -2]]
        let s = model.a().view((2, 0), (2, 2)) / dt;
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]));
        assert_eq!((model.n(), model.m()), (4, 2));
    }

    #[test]
    fn mass_spring_euler_limit() {
        let model = gen_mass_spring(3, 1e-12).unwrap();
        assert!((model.a() - DMatrix::identity(6, 6)).abs().max() < 1e-11);
        assert!(model.b().abs().max() < 1e-11);
        assert!(gen_mass_spring(3, 0.0).is_err());
        assert!(gen_mass_spring(0, 0.1).is_err());
    }

    #[test]
    fn multi_agent_dimensions() {
        let model = gen_multi_agent(200, 5, 5, 5, 0.2, 1).unwrap();
        assert_eq!((model.n(), model.m()), (1000, 1000));
        assert_eq!(model.partition().max_block_size(), 25);
    }

    #[test]
    fn multi_agent_entries_and_degree() {
        let (agents, degree, ns, ms, dt) = (12, 3, 2, 3, 0.2);
        let model = gen_multi_agent(agents, degree, ns, ms, dt, 5).unwrap();
        let ac = (model.a() - DMatrix::identity(agents * ns, agents * ns)) / dt;
        let bc = model.b() / dt;
        for i in 0..agents {
            let mut a_blocks = 0;
            let mut b_blocks = 0;
            for j in 0..agents {
                let ab = ac.view((i * ns, j * ns), (ns, ns));
                let bb = bc.view((i * ns, j * ms), (ns, ms));
                if ab.iter().any(|&v| v != 0.0) {
                    a_blocks += 1;
                    assert!(ab.iter().all(|v| (0.3 - 1e-12..=0.4 + 1e-12).contains(&v.abs())));
                }
                if bb.iter().any(|&v| v != 0.0) {
                    b_blocks += 1;
                    assert!(bb.iter().all(|v| (0.3 - 1e-12..=0.4 + 1e-12).contains(&v.abs())));
                }
            }
            assert_eq!(a_blocks, degree + 1);
            assert_eq!(b_blocks, degree + 1);
        }
    }

    #[test]
    fn multi_agent_without_neighbors_is_block_diagonal() {
        let model = gen_multi_agent(5, 0, 2, 2, 0.2, 3).unwrap();
        for (r, c) in (0..10).flat_map(|r| (0..10).map(move |c| (r, c))) {
            if r / 2 != c / 2 {
                assert_eq!(model.a()[(r, c)], 0.0);
                assert_eq!(model.b()[(r, c)], 0.0);
            }
        }
        assert!(gen_multi_agent(5, 5, 2, 2, 0.2, 3).is_err());
    }
}
