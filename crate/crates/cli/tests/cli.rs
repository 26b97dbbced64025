use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prda::data::{save_dataset, synth_domain_pair, DataFormat};
use prda::{Dataset, ShiftFamily, ShiftSpec};
use serde_json::Value;

fn prda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prda"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    source: PathBuf,
    target: PathBuf,
    target_unlabelled: PathBuf,
    target_labels: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let (s, t) = synth_domain_pair(&ShiftSpec {
        family: ShiftFamily::Rotation,
        magnitude: 0.4,
        classes: 2,
        per_class: 60,
        dim: 8,
        seed: 1,
    })
    .unwrap();
    let source = dir.path().join("source.csv");
    let target = dir.path().join("target.bin");
    let target_unlabelled = dir.path().join("target_x.csv");
    let target_labels = dir.path().join("target_y.txt");
    save_dataset(&s, &source, DataFormat::Csv).unwrap();
    save_dataset(&t, &target, DataFormat::Binary).unwrap();
    let bare = Dataset::new(t.features.clone(), None, "target_x").unwrap();
    save_dataset(&bare, &target_unlabelled, DataFormat::Csv).unwrap();
    let labels: String = t.labels.unwrap().iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&target_labels, format!("label\n{labels}")).unwrap();
    Fixture {
        _dir: dir,
        source,
        target,
        target_unlabelled,
        target_labels,
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_is_reproducible_and_echoes_defaults() {
    let f = fixture();
    let args = [
        "run",
        "--source",
        p(&f.source),
        "--target",
        p(&f.target),
        "--seed",
        "7",
    ];
    let first = stdout(&prda(&args));
    assert_eq!(first, stdout(&prda(&args)));

    let report: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(report["schema"], "prda-job-report");
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["seed"], 7);
    assert_eq!(
        report["config"]["lambda_schedule"],
        serde_json::json!([0.8, 0.6, 0.4, 0.2])
    );
    assert_eq!(report["rounds"].as_array().unwrap().len(), 4);
    assert!(report.get("wall_clock_seconds").is_none());
    let acc = &report["accuracy"];
    for key in ["prda", "sa_baseline", "source_only"] {
        let v = acc[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn separate_label_file_matches_embedded_labels() {
    let f = fixture();
    let common = ["--source", p(&f.source), "--seed", "2", "--k", "4"];
    let embedded: Value = serde_json::from_str(&stdout(&prda(
        &[&["run", "--target", p(&f.target)][..], &common].concat(),
    )))
    .unwrap();
    let separate: Value = serde_json::from_str(&stdout(&prda(
        &[
            &[
                "run",
                "--target",
                p(&f.target_unlabelled),
                "--target-labels",
                p(&f.target_labels),
            ][..],
            &common,
        ]
        .concat(),
    )))
    .unwrap();
    assert_eq!(embedded["accuracy"], separate["accuracy"]);
    assert_eq!(embedded["prda_predictions"], separate["prda_predictions"]);

    let unlabelled: Value = serde_json::from_str(&stdout(&prda(
        &[&["run", "--target", p(&f.target_unlabelled)][..], &common].concat(),
    )))
    .unwrap();
    assert!(unlabelled.get("accuracy").is_none());
    assert_eq!(unlabelled["prda_predictions"], embedded["prda_predictions"]);
}

#[test]
fn run_writes_csv_and_round_stream() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let rounds = dir.path().join("rounds.jsonl");
    let status = prda(&[
        "run",
        "--source",
        p(&f.source),
        "--target",
        p(&f.target),
        "--lambdas",
        "0.7,0.3",
        "--format",
        "csv",
        "--out",
        p(&out),
        "--rounds-jsonl",
        p(&rounds),
    ]);
    assert!(status.status.success());
    let table = std::fs::read_to_string(&out).unwrap();
    assert!(table.starts_with("kind,method,round,lambda,accepted_count,source_size,accuracy\n"));
    assert_eq!(table.lines().count(), 1 + 2 + 3);
    let lines: Vec<Value> = std::fs::read_to_string(&rounds)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["lambda"], 0.3);
}

#[test]
fn timing_is_opt_in() {
    let f = fixture();
    let out = stdout(&prda(&[
        "run",
        "--source",
        p(&f.source),
        "--target",
        p(&f.target),
        "--timing",
    ]));
    let report: Value = serde_json::from_str(&out).unwrap();
    assert!(report["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn bad_tau_is_a_usage_error() {
    let f = fixture();
    let out = prda(&[
        "run",
        "--source",
        p(&f.source),
        "--target",
        p(&f.target),
        "--tau",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 1]"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let f = fixture();
    for args in [
        vec![
            "run",
            "--source",
            p(&f.source),
            "--target",
            p(&f.target),
            "--lambdas",
            "0.2,0.8",
        ],
        vec![
            "run",
            "--source",
            p(&f.source),
            "--target",
            p(&f.target),
            "--bogus",
        ],
        vec![
            "sweep",
            "--family",
            "shear",
            "--magnitudes",
            "0.1",
            "--seeds",
            "1",
        ],
        vec![
            "probe",
            "--a",
            p(&f.source),
            "--b",
            p(&f.target),
            "--folds",
            "1",
        ],
    ] {
        assert_eq!(prda(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn data_problems_exit_with_one() {
    let f = fixture();
    let missing = prda(&[
        "run",
        "--source",
        "/nonexistent/source.csv",
        "--target",
        p(&f.target),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    let unlabelled_source = prda(&[
        "run",
        "--source",
        p(&f.target_unlabelled),
        "--target",
        p(&f.target),
    ]);
    assert_eq!(unlabelled_source.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unlabelled_source.stderr).contains("label"));
}

#[test]
fn probe_of_a_file_against_itself_is_near_chance() {
    let f = fixture();
    let out = stdout(&prda(&[
        "probe",
        "--a",
        p(&f.source),
        "--b",
        p(&f.source),
        "--folds",
        "4",
    ]));
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 4);
    let mean = report["mean_accuracy"].as_f64().unwrap();
    assert!((mean - 0.5).abs() <= 0.05, "{mean}");
}

#[test]
fn sweep_table_shape_and_no_shift_degeneracy() {
    let out = stdout(&prda(&[
        "sweep",
        "--family",
        "rotation",
        "--magnitudes",
        "0,0.3",
        "--seeds",
        "3",
        "--per-class",
        "50",
        "--dim",
        "8",
        "--k",
        "4",
    ]));
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("family,magnitude,seed,method,accuracy,probe_accuracy")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3 * 3);
    let mean = |method: &str| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == "0" && r[3] == method)
            .map(|r| r[4].parse::<f64>().unwrap())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!((mean("prda") - mean("source-only")).abs() <= 0.02);
}

#[test]
fn sweep_output_ignores_thread_count() {
    let args = [
        "sweep",
        "--family",
        "translation",
        "--magnitudes",
        "0.5,1",
        "--seeds",
        "2",
        "--per-class",
        "30",
        "--k",
        "3",
    ];
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_prda"))
            .args(args)
            .env("PRDA_THREADS", threads)
            .output()
            .unwrap();
        stdout(&out)
    };
    assert_eq!(run("1"), run("3"));
}
