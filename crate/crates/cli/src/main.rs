use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wdro::PhiSpec;
use wdro_cli::config::{Method, Overrides, RunConfig, SigmaSetting};
use wdro_cli::{run, CliError};

/// Regularized Wasserstein DRO on discretized grids.
///
/// Exit codes: 0 success, 1 numerical failure or failed diagnostics,
/// 2 invalid configuration or input.
#[derive(Parser)]
#[command(name = "wdro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write `solution.json`.
    Solve(SolveArgs),
    /// Entropic solves over an (eps, delta) grid; writes `sweep.csv` and `sweep.json`.
    Sweep(SweepArgs),
    /// Lagrangian approximation and radius-shrinkage checks; writes `verify.json`.
    Verify(CommonArgs),
    /// Cross-check the dual against linear-programming and transport oracles.
    Oracle(CommonArgs),
    /// Print or write a random instance config.
    GenInstance(GenArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// A positive number or `auto`.
    #[arg(long)]
    sigma: Option<SigmaSetting>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// `kl` or `chi2`.
    #[arg(long)]
    phi: Option<PhiSpec>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Comma-separated eps values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    eps: Option<Vec<f64>>,
    /// Comma-separated delta values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<SigmaSetting>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 17)]
    points: usize,
    /// Config file to write; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            eps: self.eps,
            delta: self.delta,
            sigma: self.sigma,
            rho: self.rho,
            seed: self.seed,
            output: self.output.clone(),
            ..Overrides::default()
        }
    }
}

fn load(path: &std::path::Path, o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(o)?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("WDRO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("WDRO_THREADS: expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("WDRO_THREADS: {e}")))
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Solve(a) => {
            let mut o = a.common.overrides();
            o.method = a.method;
            o.phi = a.phi;
            run::solve(&load(&a.common.config, &o)?)
        }
        Command::Sweep(a) => {
            let o = Overrides {
                sigma: a.sigma,
                rho: a.rho,
                seed: a.seed,
                output: a.output,
                eps_list: a.eps,
                delta_list: a.delta,
                ..Overrides::default()
            };
            run::sweep(&load(&a.config, &o)?)
        }
        Command::Verify(a) => run::verify(&load(&a.config, &a.overrides())?),
        Command::Oracle(a) => run::oracle(&load(&a.config, &a.overrides())?),
        Command::GenInstance(a) => {
            let cfg = run::gen_instance(a.seed, a.points)?;
            let text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Diagnostics(e.to_string()))?;
            match a.output {
                Some(path) => {
                    std::fs::write(&path, text + "\n").map_err(|source| CliError::Io { path: path.clone(), source })?;
                    Ok(format!("wrote {}", path.display()))
                }
                None => Ok(text),
            }
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(line) => {
            // a closed pipe is not an error of the solver
            let _ = writeln!(std::io::stdout(), "{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
