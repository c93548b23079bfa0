//! Linear time-invariant models `x[t+1] = A x[t] + B u[t] + w[t]`, trajectory
//! simulation and the analytic covariance of a design row.

mod generators;

pub use generators::{gen_mass_spring, gen_multi_agent, gen_synthetic};

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockstruct::BlockPartition;
use crate::error::{Error, Result};
use crate::linalg::{condition_from_extremes, eigen_extremes, psd_factor, validate_covariance};

/// A model together with its block partition. `Θ* = [A B]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sigma_u: DMatrix<f64>,
    sigma_w: DMatrix<f64>,
    partition: BlockPartition,
}

impl SystemModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        sigma_u: DMatrix<f64>,
        sigma_w: DMatrix<f64>,
        partition: BlockPartition,
    ) -> Result<Self> {
        let (n, m) = (partition.n(), partition.m());
        let check = |mat: &DMatrix<f64>, shape: (usize, usize), what: &str| {
            if mat.shape() != shape {
                Err(Error::InvalidModel(format!(
                    "{what} has shape {:?}, partition implies {shape:?}",
                    mat.shape()
                )))
            } else {
                Ok(())
            }
        };
        check(&a, (n, n), "A")?;
        check(&b, (n, m), "B")?;
        check(&sigma_u, (m, m), "sigma_u")?;
        check(&sigma_w, (n, n), "sigma_w")?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrices"));
        }
        validate_covariance(&sigma_u, "sigma_u")?;
        validate_covariance(&sigma_w, "sigma_w")?;
        Ok(Self {
            a,
            b,
            sigma_u,
            sigma_w,
            partition,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sigma_u(&self) -> &DMatrix<f64> {
        &self.sigma_u
    }

    pub fn sigma_w(&self) -> &DMatrix<f64> {
        &self.sigma_w
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `Θ* = [A B]ᵀ`, shape `(n+m) × n`.
    pub fn theta(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut theta = DMatrix::zeros(n + m, n);
        theta.rows_mut(0, n).copy_from(&self.a.transpose());
        theta.rows_mut(n, m).copy_from(&self.b.transpose());
        theta
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_json()?.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(
    rows: &[Vec<f64>],
    expected: (usize, usize),
    field: &str,
) -> Result<DMatrix<f64>> {
    let (r, c) = expected;
    if rows.len() != r {
        return Err(Error::InvalidModel(format!(
            "field `{field}`: expected {r} rows, found {}",
            rows.len()
        )));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(Error::InvalidModel(format!(
            "field `{field}`: row {i} has {} entries, expected {c}",
            row.len()
        )));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

/// On-disk model layout: row-major nested arrays.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    m: usize,
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    sigma_u: Vec<Vec<f64>>,
    sigma_w: Vec<Vec<f64>>,
}

impl From<&SystemModel> for ModelFile {
    fn from(model: &SystemModel) -> Self {
        ModelFile {
            n: model.n(),
            m: model.m(),
            row_sizes: model.partition.row_sizes().to_vec(),
            col_sizes: model.partition.col_sizes().to_vec(),
            a: to_rows(&model.a),
            b: to_rows(&model.b),
            sigma_u: to_rows(&model.sigma_u),
            sigma_w: to_rows(&model.sigma_w),
        }
    }
}

impl TryFrom<ModelFile> for SystemModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let partition = BlockPartition::from_sizes(f.row_sizes, f.col_sizes)?;
        if partition.n() != f.n || partition.m() != f.m {
            return Err(Error::InvalidModel(format!(
                "fields `n`/`m` = {}/{} disagree with block sizes ({}/{})",
                f.n,
                f.m,
                partition.n(),
                partition.m()
            )));
        }
        let (n, m) = (f.n, f.m);
        SystemModel::new(
            from_rows(&f.a, (n, n), "A")?,
            from_rows(&f.b, (n, m), "B")?,
            from_rows(&f.sigma_u, (m, m), "sigma_u")?,
            from_rows(&f.sigma_w, (n, n), "sigma_w")?,
            partition,
        )
    }
}

/// Last-step regression data of `d` independent trajectories.
///
/// Row `i` of `x` is `[x⁽ⁱ⁾[T−1]ᵀ u⁽ⁱ⁾[T−1]ᵀ]`, row `i` of `y` is `x⁽ⁱ⁾[T]ᵀ` and
/// row `i` of `w` is the disturbance `w⁽ⁱ⁾[T−1]ᵀ`. The disturbance is only
/// known for simulated batches.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub w: Option<DMatrix<f64>>,
    pub horizon: usize,
    pub seed: Option<u64>,
}

impl TrajectoryBatch {
    /// Builds a batch from observed data, checking shapes.
    pub fn from_data(x: DMatrix<f64>, y: DMatrix<f64>, horizon: usize) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Shape {
                context: "trajectory batch",
                expected: (x.nrows(), y.ncols()),
                found: y.shape(),
            });
        }
        Ok(Self {
            x,
            y,
            w: None,
            horizon,
            seed: None,
        })
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn m(&self) -> usize {
        self.x.ncols() - self.y.ncols()
    }

    pub fn check_partition(&self, partition: &BlockPartition) -> Result<()> {
        let expected = (self.d(), partition.dim());
        if self.x.shape() != expected {
            return Err(Error::Shape {
                context: "design matrix X",
                expected,
                found: self.x.shape(),
            });
        }
        let expected = (self.d(), partition.n());
        if self.y.shape() != expected {
            return Err(Error::Shape {
                context: "observation matrix Y",
                expected,
                found: self.y.shape(),
            });
        }
        Ok(())
    }

    /// CSV with one row per trajectory: `x[T−1]`, `u[T−1]`, then `x[T]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let mut wtr = csv::Writer::from_writer(out);
        let header = (0..n)
            .map(|k| format!("x{k}"))
            .chain((0..m).map(|k| format!("u{k}")))
            .chain((0..n).map(|k| format!("next_x{k}")));
        wtr.write_record(header)?;
        for i in 0..self.d() {
            let row = self
                .x
                .row(i)
                .iter()
                .chain(self.y.row(i).iter())
                .map(|v| v.to_string())
                .collect::<Vec<_>>();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a batch written by [`TrajectoryBatch::write_csv`]; `n` and `m`
    /// fix the column split.
    pub fn read_csv<R: Read>(input: R, n: usize, m: usize, horizon: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let width = 2 * n + m;
        let header_len = rdr.headers()?.len();
        if header_len != width {
            return Err(Error::InvalidArgument(format!(
                "batch CSV has {header_len} columns, expected {width} for n={n}, m={m}"
            )));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::InvalidArgument(format!(
                            "batch CSV record {} column {c}: {e}",
                            line + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            xs.extend_from_slice(&vals[..n + m]);
            ys.extend_from_slice(&vals[n + m..]);
        }
        let d = xs.len() / (n + m).max(1);
        Self::from_data(
            DMatrix::from_row_slice(d, n + m, &xs),
            DMatrix::from_row_slice(d, n, &ys),
            horizon,
        )
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon < 2 {
        Err(Error::Horizon(horizon))
    } else {
        Ok(())
    }
}

/// Trajectory `index` of a batch seeded with `seed` always draws from the
/// same ChaCha stream.
fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn gaussian(factor: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(rng));
    factor * z
}

/// Simulates `d` trajectories from `x[0] = 0` up to time `T` and keeps the
/// last transition of each.
pub fn simulate_batch(
    model: &SystemModel,
    horizon: usize,
    d: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    check_horizon(horizon)?;
    if d == 0 {
        return Err(Error::InvalidArgument("trajectory count must be positive".into()));
    }
    let (n, m) = (model.n(), model.m());
    let fu = psd_factor(&model.sigma_u, "sigma_u")?;
    let fw = psd_factor(&model.sigma_w, "sigma_w")?;

    let rows: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i);
            let mut x = DVector::zeros(n);
            for _ in 0..horizon - 1 {
                let u = gaussian(&fu, &mut rng);
                let w = gaussian(&fw, &mut rng);
                x = &model.a * &x + &model.b * &u + w;
            }
            let u = gaussian(&fu, &mut rng);
            let w = gaussian(&fw, &mut rng);
            (x, u, w)
        })
        .collect();

    let mut x = DMatrix::zeros(d, n + m);
    let mut w = DMatrix::zeros(d, n);
    for (i, (xs, us, ws)) in rows.iter().enumerate() {
        x.view_mut((i, 0), (1, n)).copy_from(&xs.transpose());
        x.view_mut((i, n), (1, m)).copy_from(&us.transpose());
        w.row_mut(i).copy_from(&ws.transpose());
    }
    let y = &x * model.theta() + &w;
    Ok(TrajectoryBatch {
        x,
        y,
        w: Some(w),
        horizon,
        seed: Some(seed),
    })
}

/// Analytic covariance of a design row and the quantities derived from it.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    #[serde(serialize_with = "serialize_rows")]
    pub sigma_tilde: DMatrix<f64>,
    #[serde(serialize_with = "serialize_rows")]
    pub f_t: DMatrix<f64>,
    #[serde(serialize_with = "serialize_rows")]
    pub g_t: DMatrix<f64>,
    pub kappa: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma_max_sq: f64,
}

fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

/// `F_T = [A^{T−2}B … AB B]` and `G_T = [A^{T−2} … A I]`.
pub fn horizon_stacks(model: &SystemModel, horizon: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_horizon(horizon)?;
    let (n, m) = (model.n(), model.m());
    let steps = horizon - 1;
    let mut f = DMatrix::zeros(n, m * steps);
    let mut g = DMatrix::zeros(n, n * steps);
    let mut power = DMatrix::identity(n, n);
    // fill from the rightmost slot (power 0) leftwards
    for k in 0..steps {
        let slot = steps - 1 - k;
        g.columns_mut(slot * n, n).copy_from(&power);
        f.columns_mut(slot * m, m).copy_from(&(&power * &model.b));
        if k + 1 < steps {
            power = &model.a * &power;
        }
    }
    Ok((f, g))
}

pub fn design_covariance(model: &SystemModel, horizon: usize) -> Result<CovarianceReport> {
    let (f, g) = horizon_stacks(model, horizon)?;
    let (n, m) = (model.n(), model.m());
    let su = kron_identity(&model.sigma_u, horizon - 1);
    let sw = kron_identity(&model.sigma_w, horizon - 1);
    let upper = &f * su * f.transpose() + &g * sw * g.transpose();
    let mut sigma = DMatrix::zeros(n + m, n + m);
    sigma.view_mut((0, 0), (n, n)).copy_from(&upper);
    sigma.view_mut((n, n), (m, m)).copy_from(&model.sigma_u);
    // exact symmetry for downstream eigen-solvers
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let (lambda_min, lambda_max) = eigen_extremes(&sigma);
    let sigma_max_sq = sigma.diagonal().iter().copied().fold(0.0, f64::max);
    Ok(CovarianceReport {
        kappa: condition_from_extremes(lambda_min, lambda_max),
        sigma_tilde: sigma,
        f_t: f,
        g_t: g,
        lambda_min,
        lambda_max,
        sigma_max_sq,
    })
}

/// `κ(F_T F_Tᵀ + G_T G_Tᵀ)`, the unweighted conditioning of the state part.
pub fn horizon_condition_number(model: &SystemModel, horizon: usize) -> Result<f64> {
    let (f, g) = horizon_stacks(model, horizon)?;
    let gram = &f * f.transpose() + &g * g.transpose();
    let gram = (&gram + gram.transpose()) * 0.5;
    let (lo, hi) = eigen_extremes(&gram);
    Ok(condition_from_extremes(lo, hi))
}

fn kron_identity(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let k = block.nrows();
    let mut out = DMatrix::zeros(k * copies, k * copies);
    for c in 0..copies {
        out.view_mut((c * k, c * k), (k, k)).copy_from(block);
    }
    out
}
