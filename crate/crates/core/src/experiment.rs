//! Seeded parameter sweeps.
//!
//! A sweep visits every `(T, d, seed)` triple of the configuration in
//! declaration order. Each point generates the model for its seed, draws a
//! batch, runs the requested estimators and records one row per estimator.
//! Points run concurrently on a bounded pool; rows are written in
//! configuration order, so output depends only on the configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::blockstruct::{support_pattern, BlockSupport};
use crate::error::{Error, Result};
use crate::lti::{
    design_covariance, gen_mass_spring, gen_multi_agent, gen_synthetic, simulate_batch,
    SystemModel,
};
use crate::metrics::{error_norms, mismatch_error, rme, rst};
use crate::solver::{solve_block_regularized, solve_least_squares, EstimatorConfig};
use crate::theory::{lambda_for, mutual_incoherence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Synthetic {
        n: usize,
        w: usize,
    },
    MassSpring {
        masses: usize,
        dt: f64,
    },
    MultiAgent {
        agents: usize,
        degree: usize,
        state_size: usize,
        input_size: usize,
        dt: f64,
    },
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Synthetic { .. } => "synthetic",
            Self::MassSpring { .. } => "mass_spring",
            Self::MultiAgent { .. } => "multi_agent",
        }
    }

    /// Compact `key=value` list used in the CSV `params` column.
    pub fn params(&self) -> String {
        match self {
            Self::Synthetic { n, w } => format!("n={n};w={w}"),
            Self::MassSpring { masses, dt } => format!("masses={masses};dt={dt}"),
            Self::MultiAgent {
                agents,
                degree,
                state_size,
                input_size,
                dt,
            } => format!(
                "agents={agents};degree={degree};state_size={state_size};input_size={input_size};dt={dt}"
            ),
        }
    }

    /// Builds the model. The mass-spring system ignores `seed`.
    pub fn generate(&self, seed: u64) -> Result<SystemModel> {
        match *self {
            Self::Synthetic { n, w } => gen_synthetic(n, w, seed),
            Self::MassSpring { masses, dt } => gen_mass_spring(masses, dt),
            Self::MultiAgent {
                agents,
                degree,
                state_size,
                input_size,
                dt,
            } => gen_multi_agent(agents, degree, state_size, input_size, dt, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// The default schedule of [`crate::theory::lambda_schedule`].
    #[serde(rename = "eq44")]
    Schedule,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    BlockReg,
    LeastSquares,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Self::BlockReg => "block_reg",
            Self::LeastSquares => "least_squares",
        }
    }
}

fn default_lambda_mode() -> LambdaMode {
    LambdaMode::Schedule
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::BlockReg, Estimator::LeastSquares]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    #[serde(rename = "T_list")]
    pub t_list: Vec<usize>,
    pub d_list: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_lambda_mode")]
    pub lambda_mode: LambdaMode,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Cap on concurrently evaluated sweep points; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Solver settings; `lambda_d` is overwritten per point.
    #[serde(default)]
    pub solver: EstimatorConfig,
    /// Wall time varies between runs, so it is only written on request.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("`{what}` must not be empty")))
            }
        };
        nonempty(!self.t_list.is_empty(), "T_list")?;
        nonempty(!self.d_list.is_empty(), "d_list")?;
        nonempty(!self.seeds.is_empty(), "seeds")?;
        nonempty(!self.estimators.is_empty(), "estimators")?;
        if let Some(&t) = self.t_list.iter().find(|&&t| t < 2) {
            return Err(Error::Config(format!("T_list entry {t} is below 2")));
        }
        if self.d_list.contains(&0) {
            return Err(Error::Config("d_list entries must be positive".into()));
        }
        if let LambdaMode::Fixed(v) = self.lambda_mode {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("fixed lambda {v} must be finite and nonnegative")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        EstimatorConfig {
            lambda_d: 0.0,
            ..self.solver.clone()
        }
        .validate()
        .map_err(|e| Error::Config(e.to_string()))
    }
}

/// One CSV row. Empty cells mark values that do not apply, such as error
/// norms of an undefined least-squares estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub generator: String,
    pub params: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub d: usize,
    pub seed: u64,
    pub estimator: String,
    /// `ok` or `undefined`.
    pub status: String,
    pub lambda_d: Option<f64>,
    pub mismatch: Option<usize>,
    pub rme: Option<f64>,
    pub rst: f64,
    pub linf: Option<f64>,
    pub op_norm: Option<f64>,
    pub normalized_2: Option<f64>,
    pub kappa: f64,
    pub gamma: Option<f64>,
    pub converged: Option<bool>,
    pub wall_time_seconds: Option<f64>,
}

/// Column names in CSV order.
pub const CSV_HEADER: [&str; 20] = [
    "generator",
    "params",
    "n",
    "m",
    "T",
    "d",
    "seed",
    "estimator",
    "status",
    "lambda_d",
    "mismatch",
    "rme",
    "rst",
    "linf",
    "op_norm",
    "normalized_2",
    "kappa",
    "gamma",
    "converged",
    "wall_time_seconds",
];

/// Seed of the trajectory batch for one sweep point (SplitMix64 mixing).
pub fn batch_seed(seed: u64, horizon: usize, d: usize) -> u64 {
    let mut z = seed
        ^ (horizon as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (d as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Point {
    horizon: usize,
    d: usize,
    seed: u64,
}

fn run_point(cfg: &ExperimentConfig, pt: Point) -> Result<Vec<ExperimentRecord>> {
    let model = cfg.generator.generate(pt.seed)?;
    let partition = model.partition().clone();
    let theta_star = model.theta();
    let truth = support_pattern(&theta_star, &partition, 0.0)?;
    let cov = design_covariance(&model, pt.horizon)?;
    // an undefined incoherence leaves the cell empty
    let gamma = mutual_incoherence(&cov.sigma_tilde, &partition, &truth).ok();
    let batch = simulate_batch(&model, pt.horizon, pt.d, batch_seed(pt.seed, pt.horizon, pt.d))?;
    let lambda_d = match cfg.lambda_mode {
        LambdaMode::Schedule => lambda_for(&partition, pt.d),
        LambdaMode::Fixed(v) => v,
    };
    let base = ExperimentRecord {
        generator: cfg.generator.name().into(),
        params: cfg.generator.params(),
        n: model.n(),
        m: model.m(),
        t: pt.horizon,
        d: pt.d,
        seed: pt.seed,
        estimator: String::new(),
        status: "ok".into(),
        lambda_d: None,
        mismatch: None,
        rme: None,
        rst: rst(pt.d, model.n(), model.m()),
        linf: None,
        op_norm: None,
        normalized_2: None,
        kappa: cov.kappa,
        gamma,
        converged: None,
        wall_time_seconds: None,
    };

    let fill = |rec: &mut ExperimentRecord, est: &BlockSupport, theta: &nalgebra::DMatrix<f64>| -> Result<()> {
        let mismatch = mismatch_error(est, &truth)?;
        rec.mismatch = Some(mismatch);
        rec.rme = Some(rme(mismatch, &partition));
        let errs = error_norms(theta, &theta_star)?;
        rec.linf = Some(errs.linf_elementwise);
        rec.op_norm = Some(errs.op_norm);
        rec.normalized_2 = Some(errs.normalized_2);
        Ok(())
    };

    let mut out = Vec::with_capacity(cfg.estimators.len());
    for &estimator in &cfg.estimators {
        let mut rec = ExperimentRecord {
            estimator: estimator.name().into(),
            ..base.clone()
        };
        let start = Instant::now();
        match estimator {
            Estimator::BlockReg => {
                let solver = EstimatorConfig {
                    lambda_d,
                    ..cfg.solver.clone()
                };
                let res = solve_block_regularized(&batch, &partition, &solver)?;
                rec.lambda_d = Some(lambda_d);
                rec.converged = Some(res.converged);
                fill(&mut rec, &res.support, &res.theta_hat)?;
            }
            Estimator::LeastSquares => match solve_least_squares(&batch) {
                Ok(theta) => {
                    let support = support_pattern(&theta, &partition, cfg.solver.zero_tol)?;
                    fill(&mut rec, &support, &theta)?;
                }
                Err(Error::LsUndefined(_)) => rec.status = "undefined".into(),
                Err(e) => return Err(e),
            },
        }
        if cfg.record_wall_time {
            rec.wall_time_seconds = Some(start.elapsed().as_secs_f64());
        }
        out.push(rec);
    }
    Ok(out)
}

/// Runs every sweep point and returns the records in configuration order.
/// When `output_path` is set the CSV is written there as well.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    // fail on bad generator parameters before any work is scheduled
    config.generator.generate(config.seeds[0])?;
    // likewise for an unwritable destination
    let sink = match &config.output_path {
        Some(path) => Some(File::create(path)?),
        None => None,
    };

    let mut points = Vec::new();
    for &horizon in &config.t_list {
        for &d in &config.d_list {
            for &seed in &config.seeds {
                points.push(Point { horizon, d, seed });
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<ExperimentRecord>>> = pool.install(|| {
        use rayon::prelude::*;
        points.par_iter().map(|&pt| run_point(config, pt)).collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    if let Some(file) = sink {
        write_records(BufWriter::new(file), &records)?;
    }
    Ok(records)
}

/// Writes records as CSV with the fixed header.
pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
