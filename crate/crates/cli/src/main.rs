//! `prda`: run progressive domain augmentation jobs, baselines, divergence
//! probes and synthetic shift sweeps from the command line.

mod output;
mod probe_cmd;
mod run_cmd;
mod sweep_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prda::{LambdaSchedule, PipelineConfig, PrdaError, ShiftFamily, TrainConfig};

#[derive(Parser)]
#[command(
    name = "prda",
    version,
    about = "Progressive domain augmentation for domain adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adapt a labelled source to an unlabelled target and report PrDA,
    /// SA-baseline and source-only results.
    Run(run_cmd::RunArgs),
    /// Measure how separable two domains are.
    Probe(probe_cmd::ProbeArgs),
    /// Sweep a synthetic shift family over magnitudes and seeds.
    Sweep(sweep_cmd::SweepArgs),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

/// Pipeline knobs shared by `run` and `sweep`.
#[derive(Args, Clone, Debug)]
pub struct PipelineArgs {
    /// Subspace dimension (clamped to what the data supports).
    #[arg(long, default_value_t = 44)]
    k: usize,
    /// Relative reconstruction-error threshold, in (0, 1].
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    /// Pseudo-label confidence threshold, in (0, 1).
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    /// Strictly decreasing mixing weights.
    #[arg(long, default_value = "0.8,0.6,0.4,0.2", value_parser = parse_schedule)]
    lambdas: LambdaSchedule,
    /// Virtual batch size [default: min(n_source, n_target, 256)].
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    /// Train one pseudo-labelling classifier across all subspace pairs.
    #[arg(long)]
    shared_h: bool,
    /// Re-orthonormalise the target-aligned bases before projecting.
    #[arg(long)]
    reorthonormalize_ta: bool,
    /// Pair every drawn source row with every drawn target row.
    #[arg(long)]
    cross_pairing: bool,
}

impl PipelineArgs {
    pub fn config(&self, seed: u64) -> Result<PipelineConfig, PrdaError> {
        let cfg = PipelineConfig {
            k: self.k,
            tau: self.tau,
            rho: self.rho,
            lambda_schedule: self.lambdas.clone(),
            batch: self.batch,
            classifier: TrainConfig {
                learning_rate: self.learning_rate,
                epochs: self.epochs,
                l2: self.l2,
                seed,
            },
            seed,
            shared_h: self.shared_h,
            reorthonormalize_ta: self.reorthonormalize_ta,
            pairing: if self.cross_pairing {
                prda::Pairing::Cross
            } else {
                prda::Pairing::Zip
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_schedule(s: &str) -> Result<LambdaSchedule, String> {
    LambdaSchedule::parse(s).map_err(|e| e.to_string())
}

pub fn parse_family(s: &str) -> Result<ShiftFamily, String> {
    s.parse().map_err(|e: PrdaError| e.to_string())
}

/// Anything that should end the process with a message.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<PrdaError> for CliError {
    fn from(e: PrdaError) -> Self {
        match e {
            PrdaError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub fn output_path(p: &Option<PathBuf>) -> Option<&std::path::Path> {
    p.as_deref().filter(|p| p.as_os_str() != "-")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run_cmd::run(&args),
        Command::Probe(args) => probe_cmd::run(&args),
        Command::Sweep(args) => sweep_cmd::run(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
