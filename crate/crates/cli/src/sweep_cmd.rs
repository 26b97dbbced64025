use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use prda::data::synth_domain_pair;
use prda::pipeline::{accuracy, run_prda, run_sa_baseline, run_source_only};
use prda::{divergence_probe, Method, ShiftFamily, ShiftSpec, TrainConfig};
use rayon::prelude::*;

use crate::output::emit;
use crate::{output_path, parse_family, CliError, PipelineArgs};

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// rotation, translation, covariance-scale or mixed.
    #[arg(long, value_parser = parse_family)]
    family: ShiftFamily,
    /// Comma-separated shift magnitudes (radians for rotation).
    #[arg(long, value_delimiter = ',', required = true)]
    magnitudes: Vec<f64>,
    /// Number of seeds per magnitude, numbered from 0.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 250)]
    per_class: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

pub const METHODS: [Method; 3] = [Method::SourceOnly, Method::SaBaseline, Method::Prda];

struct Cell {
    magnitude: f64,
    seed: u64,
    accuracies: [f64; 3],
    probe: f64,
}

fn thread_count() -> Result<usize, CliError> {
    match std::env::var("PRDA_THREADS") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "PRDA_THREADS must be a non-negative integer, got '{v}'"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn run_cell(args: &SweepArgs, magnitude: f64, seed: u64) -> Result<Cell, CliError> {
    let spec = ShiftSpec {
        family: args.family,
        magnitude,
        classes: args.classes,
        per_class: args.per_class,
        dim: args.dim,
        seed,
    };
    let (src, tgt) = synth_domain_pair(&spec)?;
    let ys = src.labels.as_deref().expect("synthetic source is labelled");
    let yt = tgt.labels.as_deref().expect("synthetic target is labelled");
    let cfg = args.pipeline.config(seed)?;
    let mut accuracies = [0.0; 3];
    for (slot, method) in accuracies.iter_mut().zip(METHODS) {
        let result = match method {
            Method::SourceOnly => run_source_only(&src.features, ys, &tgt.features, &cfg)?,
            Method::SaBaseline => run_sa_baseline(&src.features, ys, &tgt.features, &cfg)?,
            Method::Prda => run_prda(&src.features, ys, &tgt.features, &cfg)?,
        };
        *slot = accuracy(&result.target_predictions, yt)?;
    }
    let probe = divergence_probe(
        &src.features,
        &tgt.features,
        args.folds,
        seed,
        &TrainConfig::default(),
    )?;
    Ok(Cell {
        magnitude,
        seed,
        accuracies,
        probe: probe.mean_accuracy,
    })
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    if args
        .magnitudes
        .iter()
        .any(|m| !(m.is_finite() && *m >= 0.0))
    {
        return Err(CliError::Usage(
            "magnitudes must be finite and non-negative".into(),
        ));
    }
    if args.seeds == 0 {
        return Err(CliError::Usage("seeds must be at least 1".into()));
    }
    args.pipeline.config(0)?;

    let jobs: Vec<(f64, u64)> = args
        .magnitudes
        .iter()
        .flat_map(|&m| (0..args.seeds).map(move |s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    // Collecting an indexed parallel iterator keeps job order.
    let cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, s)| run_cell(args, m, s))
            .collect::<Result<_, _>>()
    })?;

    let mut text = String::from("family,magnitude,seed,method,accuracy,probe_accuracy\n");
    for cell in &cells {
        for (method, acc) in METHODS.iter().zip(cell.accuracies) {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                args.family, cell.magnitude, cell.seed, method, acc, cell.probe
            );
        }
    }
    emit(&text, output_path(&args.out))
}
