//! Compares source-only, SA and PrDA on the rotation family.
//!
//! Usage: `rotation_sweep [key=value ...]` with keys `k`, `tau`, `rho`,
//! `batch`, `seeds`, `epochs`, `lr`, `lambdas`, `degrees`, `shared_h` and
//! `reorthonormalize`. A JSON
//! `BlobGeometry` in `PRDA_GEOMETRY` overrides the default blob layout.

use std::collections::HashMap;

use prda::classifier::TrainConfig;
use prda::data::{synth_domain_pair_with, BlobGeometry, ShiftFamily, ShiftSpec};
use prda::mixup::LambdaSchedule;
use prda::pipeline::{accuracy, run_prda, run_sa_baseline, run_source_only, PipelineConfig};

fn main() -> prda::Result<()> {
    let args: HashMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| {
            a.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect();
    let get = |key: &str, default: &str| {
        args.get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    };
    let num = |key: &str, default: &str| -> f64 { get(key, default).parse().expect(key) };

    let cfg = PipelineConfig {
        k: num("k", "8") as usize,
        tau: num("tau", "0.2"),
        rho: num("rho", "0.8"),
        batch: Some(num("batch", "500") as usize),
        lambda_schedule: LambdaSchedule::parse(&get("lambdas", "0.8,0.6,0.4,0.2"))?,
        classifier: TrainConfig {
            epochs: num("epochs", "200") as usize,
            learning_rate: num("lr", "0.1"),
            ..Default::default()
        },
        shared_h: get("shared_h", "false") == "true",
        reorthonormalize_ta: get("reorthonormalize", "false") == "true",
        ..Default::default()
    };
    let seeds = num("seeds", "10") as u64;
    let degrees: Vec<f64> = get("degrees", "15,30,60")
        .split(',')
        .map(|d| d.parse().expect("degrees"))
        .collect();
    let geo: BlobGeometry = match std::env::var("PRDA_GEOMETRY") {
        Ok(json) => serde_json::from_str(&json).expect("geometry JSON"),
        Err(_) => BlobGeometry::default(),
    };

    for deg in degrees {
        let mut totals = [0.0; 3];
        for seed in 0..seeds {
            let spec = ShiftSpec {
                family: ShiftFamily::Rotation,
                magnitude: deg.to_radians(),
                classes: 2,
                per_class: 250,
                dim: 20,
                seed,
            };
            let (src, tgt) = synth_domain_pair_with(&spec, &geo)?;
            let ys = src.labels.as_ref().expect("labelled source");
            let yt = tgt.labels.as_ref().expect("labelled target");
            let cfg = PipelineConfig {
                seed,
                ..cfg.clone()
            };
            let runs = [
                run_source_only(&src.features, ys, &tgt.features, &cfg)?,
                run_sa_baseline(&src.features, ys, &tgt.features, &cfg)?,
                run_prda(&src.features, ys, &tgt.features, &cfg)?,
            ];
            for (t, r) in totals.iter_mut().zip(&runs) {
                *t += accuracy(&r.target_predictions, yt)?;
            }
        }
        let [src, sa, prda] = totals.map(|t| t / seeds as f64);
        println!(
            "{deg:>4}deg  source-only {src:.3}  sa {sa:.3}  prda {prda:.3}  prda-sa {:+.3}",
            prda - sa
        );
    }
    Ok(())
}
