//! `sinkhorn-lab`: benchmarks and numerical checks for entropic transport.
//!
//! Exit codes: 0 on success, 1 on a usage or input error, 2 when a check
//! command finds a violated bound.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::Status;
use config::{Config, Cost, Dist, Theorem1Preset};

const THREADS_ENV: &str = "SINKHORN_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "sinkhorn-lab", version, about = "Sinkhorn divergences, their sample complexity and the bounds behind them")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed of every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to SINKHORN_LAB_THREADS, then the number
    /// of cores). Never changes the output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Marginal l1 tolerance of every Sinkhorn solve.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Iteration budget of every Sinkhorn solve.
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo divergence grid: results.csv, slopes.csv, summary.csv.
    Bench(BenchArgs),
    /// Regularized vs exact transport against the eps-approximation bound.
    Theorem1(Theorem1Args),
    /// Derivative, envelope and Sobolev-scaling checks of 1D potentials.
    Potentials(PotentialsArgs),
    /// Kernel SGD on the dual against the Sinkhorn oracle.
    KernelSgd(KernelSgdArgs),
    /// Print the effective configuration as TOML.
    PrintConfig,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Sample sizes, strictly increasing.
    #[arg(long = "n", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_enum)]
    dist: Option<Dist>,
    #[arg(long, value_enum)]
    cost: Option<Cost>,
    /// Draw both samples of a cell identically (the divergence is then 0).
    #[arg(long)]
    identical_samples: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Theorem1Args {
    #[arg(long, value_enum)]
    preset: Option<Theorem1Preset>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    cost: Option<Cost>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PotentialsArgs {
    /// Dimension; only 1 is supported.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct KernelSgdArgs {
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Ball radius; calibrated from the Sinkhorn potentials when absent.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn threads(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => s.trim().parse().with_context(|| format!("{THREADS_ENV}={s:?} is not a thread count"))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        bail!("the thread count must be positive");
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<Status> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.solver.marginal_tolerance, cli.tolerance);
    set(&mut cfg.solver.max_iterations, cli.max_iterations);
    match cli.command {
        Command::Bench(a) => {
            let b = &mut cfg.bench;
            set(&mut b.dims, a.dims);
            set(&mut b.epsilons, a.epsilons);
            set(&mut b.ns, a.ns);
            set(&mut b.reps, a.reps);
            set(&mut b.dist, a.dist);
            set(&mut b.cost, a.cost);
            b.identical_samples |= a.identical_samples;
            commands::bench::run(&cfg, &a.out, threads(cli.threads)?)
        }
        Command::Theorem1(a) => {
            let t = &mut cfg.theorem1;
            set(&mut t.preset, a.preset);
            set(&mut t.instances, a.instances);
            set(&mut t.n, a.n);
            set(&mut t.d, a.d);
            set(&mut t.epsilons, a.epsilons);
            set(&mut t.cost, a.cost);
            commands::theorem1::run(&cfg, &a.out)
        }
        Command::Potentials(a) => {
            let p = &mut cfg.potentials;
            set(&mut p.d, a.d);
            set(&mut p.points, a.points);
            set(&mut p.check_epsilons, a.epsilons);
            commands::potentials::run(&cfg, &a.out)
        }
        Command::KernelSgd(a) => {
            let k = &mut cfg.kernel_sgd;
            set(&mut k.n, a.n);
            set(&mut k.d, a.d);
            set(&mut k.epsilon, a.epsilon);
            if a.lambda.is_some() {
                k.lambda = a.lambda;
            }
            set(&mut k.iterations, a.iterations);
            set(&mut k.runs, a.runs);
            commands::kernel_sgd::run(&cfg, &a.out)
        }
        Command::PrintConfig => {
            print!("{}", cfg.to_toml()?);
            Ok(Status::Pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = matches!(e.downcast_ref::<sinkhorn_lab::Error>(), Some(sinkhorn_lab::Error::BoundViolation(_)));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
