use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use prda::pipeline::{accuracy, evaluate, run_prda_observed, run_sa_baseline, run_source_only};
use prda::{PipelineConfig, RoundReport};
use serde::{Deserialize, Serialize};

use crate::output::{emit, load, read_labels};
use crate::{output_path, CliError, PipelineArgs, ReportFormat};

pub const SCHEMA: &str = "prda-job-report";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Labelled source features (CSV or binary).
    #[arg(long)]
    source: PathBuf,
    /// Target features; any label column is used for evaluation only.
    #[arg(long)]
    target: PathBuf,
    /// Target labels for evaluation, one integer per line.
    #[arg(long)]
    target_labels: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report destination; standard output when omitted or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Also write one JSON line per round to this file.
    #[arg(long)]
    rounds_jsonl: Option<PathBuf>,
    /// Include wall-clock time in the report (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainInfo {
    pub name: String,
    pub rows: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub prda: f64,
    pub sa_baseline: f64,
    pub source_only: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub schema: String,
    pub schema_version: u32,
    pub seed: u64,
    pub config: PipelineConfig,
    pub source: DomainInfo,
    pub target: DomainInfo,
    pub rounds: Vec<RoundReport>,
    pub final_source_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Accuracies>,
    pub prda_predictions: Vec<usize>,
    pub sa_predictions: Vec<usize>,
    pub source_only_predictions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = args.pipeline.config(args.seed)?;
    let source = load(&args.source)?;
    let target = load(&args.target)?;
    let ys = source.labels.clone().ok_or_else(|| {
        CliError::Runtime(format!(
            "{}: source has no label column",
            args.source.display()
        ))
    })?;
    let eval_labels = match &args.target_labels {
        Some(p) => Some(read_labels(p)?),
        None => target.labels.clone(),
    };
    if let Some(y) = &eval_labels {
        if y.len() != target.len() {
            return Err(CliError::Runtime(format!(
                "{} target labels for {} target rows",
                y.len(),
                target.len()
            )));
        }
    }

    let xt = &target.features;
    let prda = run_prda_observed(&source.features, &ys, xt, &cfg, |model| {
        eval_labels
            .as_ref()
            .and_then(|y| evaluate(model, xt, y).ok())
    })?;
    let sa = run_sa_baseline(&source.features, &ys, xt, &cfg)?;
    let src = run_source_only(&source.features, &ys, xt, &cfg)?;

    let accuracy = match &eval_labels {
        Some(y) => Some(Accuracies {
            prda: accuracy(&prda.target_predictions, y)?,
            sa_baseline: accuracy(&sa.target_predictions, y)?,
            source_only: accuracy(&src.target_predictions, y)?,
        }),
        None => None,
    };
    let report = JobReport {
        schema: SCHEMA.into(),
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        config: cfg,
        source: DomainInfo {
            name: source.name.clone(),
            rows: source.len(),
            dim: source.dim(),
        },
        target: DomainInfo {
            name: target.name.clone(),
            rows: target.len(),
            dim: target.dim(),
        },
        rounds: prda.rounds,
        final_source_size: prda.final_source_size,
        accuracy,
        prda_predictions: prda.target_predictions,
        sa_predictions: sa.target_predictions,
        source_only_predictions: src.target_predictions,
        wall_clock_seconds: args.timing.then(|| started.elapsed().as_secs_f64()),
    };

    if let Some(path) = &args.rounds_jsonl {
        let mut lines = String::new();
        for r in &report.rounds {
            lines.push_str(&serde_json::to_string(r).expect("round report serializes"));
            lines.push('\n');
        }
        emit(&lines, Some(path))?;
    }
    let text = match args.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => report_csv(&report),
    };
    emit(&text, output_path(&args.out))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-round rows followed by one summary row per method.
fn report_csv(report: &JobReport) -> String {
    let mut s = String::from("kind,method,round,lambda,accepted_count,source_size,accuracy\n");
    for r in &report.rounds {
        let _ = writeln!(
            s,
            "round,prda,{},{},{},{},{}",
            r.round,
            r.lambda,
            r.accepted_count,
            r.source_size,
            opt(r.target_accuracy)
        );
    }
    let acc = report.accuracy.as_ref();
    for (method, value) in [
        ("prda", acc.map(|a| a.prda)),
        ("sa", acc.map(|a| a.sa_baseline)),
        ("source-only", acc.map(|a| a.source_only)),
    ] {
        let size = if method == "prda" {
            report.final_source_size
        } else {
            report.source.rows
        };
        let _ = writeln!(s, "final,{method},,,,{size},{}", opt(value));
    }
    s
}
