use std::path::PathBuf;

use clap::Args;
use prda::{divergence_probe, TrainConfig};
use serde::Serialize;

use crate::output::{emit, load};
use crate::{output_path, CliError};

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// First domain (labelled 0 by the probe).
    #[arg(long)]
    a: PathBuf,
    /// Second domain (labelled 1 by the probe).
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ProbeReport {
    mean_accuracy: f64,
    folds: Vec<f64>,
    seed: u64,
}

pub fn run(args: &ProbeArgs) -> Result<(), CliError> {
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let result = divergence_probe(
        &a.features,
        &b.features,
        args.folds,
        args.seed,
        &TrainConfig::default(),
    )?;
    let report = ProbeReport {
        mean_accuracy: result.mean_accuracy,
        folds: result.folds,
        seed: args.seed,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("probe report serializes");
    text.push('\n');
    emit(&text, output_path(&args.out))
}
