use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sysid_core::experiment::{run_experiment, write_records, ExperimentConfig, GeneratorSpec};
use sysid_core::solver::least_squares_json;
use sysid_core::theory::{check_assumptions, lambda_for};
use sysid_core::{
    simulate_batch, solve_block_regularized, solve_least_squares, EstimatorConfig, SystemModel,
    TrajectoryBatch,
};

/// Sparse block-structured system identification from sample trajectories.
#[derive(Parser)]
#[command(name = "sysid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a model and write it as JSON.
    Gen(GenArgs),
    /// Simulate a batch of trajectories from a model and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the parameter from a batch file, or from a batch simulated on the fly.
    Solve(SolveArgs),
    /// Report the recovery conditions of a model.
    Check(CheckArgs),
    /// Run a configured sweep and write the CSV table.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Synthetic,
    MassSpring,
    MultiAgent,
}

#[derive(Args)]
struct GenArgs {
    /// Generator specification as JSON, e.g. {"kind":"synthetic","n":100,"w":2}.
    /// Overrides the individual generator flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    generator: Option<Generator>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    masses: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, default_value_t = 1)]
    state_size: usize,
    #[arg(long, default_value_t = 1)]
    input_size: usize,
    #[arg(long, default_value_t = 0.2)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "T", alias = "horizon", default_value_t = 3)]
    horizon: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    BlockReg,
    LeastSquares,
}

#[derive(Args)]
struct SolveArgs {
    /// Model file; supplies the block partition.
    #[arg(long)]
    model: PathBuf,
    /// Batch CSV. Without it a batch is simulated from the model.
    #[arg(long)]
    batch: Option<PathBuf>,
    #[arg(long = "T", alias = "horizon", default_value_t = 3)]
    horizon: usize,
    /// Trajectory count for a simulated batch.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Regularization weight; the default schedule for the batch size when absent.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "block-reg")]
    estimator: EstimatorArg,
    /// Solver settings as JSON (max_iter, kkt_tol, zero_tol, step_policy).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "T", alias = "horizon", default_value_t = 3)]
    horizon: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured seed list by this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; overrides `output_path` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker cap; overrides the configuration.
    #[arg(long, env = "SYSID_WORKERS")]
    workers: Option<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => gen(args),
        Command::Simulate(args) => simulate(args),
        Command::Solve(args) => solve(args),
        Command::Check(args) => check(args),
        Command::Sweep(args) => sweep(args),
    }
}

/// Writes `text` plus a newline to `path`, or to standard output.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            writeln!(f, "{text}")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_model(path: &Path) -> Result<SystemModel> {
    let file = File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    SystemModel::read_json(BufReader::new(file))
        .with_context(|| format!("invalid model file {}", path.display()))
}

fn required<T>(value: Option<T>, flag: &str, generator: &str) -> Result<T> {
    value.with_context(|| format!("--{flag} is required for the {generator} generator"))
}

fn gen(args: GenArgs) -> Result<()> {
    let spec = match (&args.config, args.generator) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<GeneratorSpec>(&text)
                .with_context(|| format!("invalid generator specification in {}", path.display()))?
        }
        (None, Some(Generator::Synthetic)) => GeneratorSpec::Synthetic {
            n: required(args.n, "n", "synthetic")?,
            w: required(args.w, "w", "synthetic")?,
        },
        (None, Some(Generator::MassSpring)) => GeneratorSpec::MassSpring {
            masses: required(args.masses, "masses", "mass-spring")?,
            dt: args.dt,
        },
        (None, Some(Generator::MultiAgent)) => GeneratorSpec::MultiAgent {
            agents: required(args.agents, "agents", "multi-agent")?,
            degree: required(args.degree, "degree", "multi-agent")?,
            state_size: args.state_size,
            input_size: args.input_size,
            dt: args.dt,
        },
        (None, None) => bail!("either --generator or --config is required"),
    };
    let model = spec.generate(args.seed)?;
    emit(args.out.as_deref(), &model.to_json()?)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let batch = simulate_batch(&model, args.horizon, args.d, args.seed)?;
    let mut out = sink(args.out.as_deref())?;
    batch.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let partition = model.partition();
    let batch = match (&args.batch, args.d) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("cannot open batch {}", path.display()))?;
            TrajectoryBatch::read_csv(BufReader::new(file), model.n(), model.m(), args.horizon)
                .with_context(|| format!("invalid batch file {}", path.display()))?
        }
        (None, Some(d)) => simulate_batch(&model, args.horizon, d, args.seed)?,
        (None, None) => bail!("give either --batch or --d"),
    };
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<EstimatorConfig>(&text)
                .with_context(|| format!("invalid solver settings in {}", path.display()))?
        }
        None => EstimatorConfig::default(),
    };
    let text = match args.estimator {
        EstimatorArg::BlockReg => {
            config.lambda_d = args.lambda.unwrap_or_else(|| lambda_for(partition, batch.d()));
            let result = solve_block_regularized(&batch, partition, &config)?;
            if !result.converged {
                eprintln!(
                    "warning: solver stopped with KKT residual {:e} above tolerance {:e}",
                    result.kkt_residual, config.kkt_tol
                );
            }
            result.to_json(config.lambda_d)?
        }
        EstimatorArg::LeastSquares => {
            let theta = solve_least_squares(&batch)?;
            least_squares_json(&theta, partition, config.zero_tol)?
        }
    };
    emit(args.out.as_deref(), &text)
}

fn check(args: CheckArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let report = check_assumptions(&model, args.horizon)?;
    emit(args.out.as_deref(), &report.to_json()?)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = ExperimentConfig::read(&args.config)
        .with_context(|| format!("invalid experiment configuration {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    let out = args.out.or_else(|| config.output_path.take());
    let records = run_experiment(&config)?;
    let mut w = sink(out.as_deref())?;
    write_records(&mut w, &records)?;
    w.flush()?;
    Ok(())
}
