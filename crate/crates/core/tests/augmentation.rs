mod common;

use common::{mean_of, normal, rng};
use prda::data::synth_domain_pair;
use prda::linalg::Matrix;
use prda::mixup::generate_virtual_domain;
use prda::pipeline::{accuracy, run_prda, run_sa_baseline, run_source_only, PipelineConfig};
use prda::{LambdaSchedule, Pairing, PrdaError, ShiftFamily, ShiftSpec};
use proptest::prelude::*;

fn shifted_gaussian(seed: u64, n: usize, mean: &[f64]) -> Matrix {
    let mut r = rng(seed);
    let data = (0..n)
        .flat_map(|_| mean.iter().map(|m| m + normal(&mut r)).collect::<Vec<_>>())
        .collect();
    Matrix::from_vec(n, mean.len(), data).unwrap()
}

#[test]
fn virtual_mean_follows_the_mixing_weight() {
    let (mu_s, mu_t) = ([4.0, -2.0, 1.0], [-1.0, 3.0, 0.0]);
    let xs = shifted_gaussian(1, 3000, &mu_s);
    let xt = shifted_gaussian(2, 3000, &mu_t);
    let v = generate_virtual_domain(&xs, &xt, 0.6, 2000, 9, Pairing::Zip).unwrap();
    let mean = mean_of(&v.samples);
    // Unit-variance coordinates mix to variance 0.6² + 0.4².
    let se = (0.36f64 + 0.16).sqrt() / 2000f64.sqrt();
    for c in 0..3 {
        let expected = 0.6 * mu_s[c] + 0.4 * mu_t[c];
        assert!(
            (mean[c] - expected).abs() < 3.0 * se,
            "coordinate {c}: {} vs {expected}",
            mean[c]
        );
    }
}

#[test]
fn virtual_domains_approach_the_target_down_the_schedule() {
    let xs = shifted_gaussian(3, 400, &[10.0, 0.0, -10.0]);
    let xt = shifted_gaussian(4, 400, &[-10.0, 5.0, 10.0]);
    let target_mean = mean_of(&xt);
    let gaps: Vec<f64> = LambdaSchedule::default()
        .values()
        .iter()
        .map(|&l| {
            let m = mean_of(
                &generate_virtual_domain(&xs, &xt, l, 256, 5, Pairing::Zip)
                    .unwrap()
                    .samples,
            );
            m.iter()
                .zip(&target_mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
}

fn small_task(seed: u64, radians: f64) -> (Matrix, Vec<usize>, Matrix, Vec<usize>) {
    let (s, t) = synth_domain_pair(&ShiftSpec {
        family: ShiftFamily::Rotation,
        magnitude: radians,
        classes: 3,
        per_class: 30,
        dim: 6,
        seed,
    })
    .unwrap();
    (s.features, s.labels.unwrap(), t.features, t.labels.unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rounds_respect_growth_confidence_and_determinism(
        seed in 0u64..1000,
        radians in 0.0f64..1.2,
        rho in 0.5f64..0.95,
        batch in 10usize..60,
        shared_h in any::<bool>(),
    ) {
        let (xs, ys, xt, _) = small_task(seed, radians);
        let cfg = PipelineConfig { k: 3, rho, batch: Some(batch), seed, shared_h, ..Default::default() };
        let result = run_prda(&xs, &ys, &xt, &cfg).unwrap();
        prop_assert_eq!(result.rounds.len(), cfg.lambda_schedule.len());
        let mut size = xs.rows();
        for r in &result.rounds {
            prop_assert!(r.source_size >= size);
            prop_assert!(r.source_size - size <= batch);
            prop_assert_eq!(r.source_size - size, r.accepted_count);
            size = r.source_size;
        }
        prop_assert_eq!(size, result.final_source_size);
        prop_assert_eq!(result.augmented_confidence.len(), size - xs.rows());
        prop_assert!(result.augmented_confidence.iter().all(|&c| c > rho));
        prop_assert_eq!(result.target_predictions.len(), xt.rows());
        prop_assert_eq!(&run_prda(&xs, &ys, &xt, &cfg).unwrap(), &result);
    }
}

#[test]
fn oversized_k_is_clamped_per_round() {
    let (xs, ys, xt, _) = small_task(5, 0.3);
    let cfg = PipelineConfig {
        batch: Some(4),
        ..Default::default()
    };
    let result = run_prda(&xs, &ys, &xt, &cfg).unwrap();
    assert!(result.rounds.iter().all(|r| r.k_used == 3));
}

#[test]
fn single_class_source_is_rejected() {
    let (xs, _, xt, _) = small_task(6, 0.3);
    let ys = vec![0; xs.rows()];
    let err = run_prda(&xs, &ys, &xt, &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, PrdaError::SingleClass(0)));
}

#[test]
fn invalid_config_is_rejected_before_work() {
    let (xs, ys, xt, _) = small_task(7, 0.3);
    let cfg = PipelineConfig {
        tau: 1.5,
        ..Default::default()
    };
    let err = run_prda(&xs, &ys, &xt, &cfg).unwrap_err();
    assert!(
        matches!(&err, PrdaError::Config(m) if m.contains("(0, 1]")),
        "{err}"
    );
}

/// Ten-seed mean target accuracy of source-only, SA and PrDA on the
/// 30° two-class rotation task in R^20.
fn rotated_mixture_means() -> [f64; 3] {
    let mut totals = [0.0; 3];
    for seed in 0..10 {
        let (s, t) = synth_domain_pair(&ShiftSpec {
            family: ShiftFamily::Rotation,
            magnitude: 30f64.to_radians(),
            classes: 2,
            per_class: 250,
            dim: 20,
            seed,
        })
        .unwrap();
        let (ys, yt) = (s.labels.unwrap(), t.labels.unwrap());
        let cfg = PipelineConfig {
            k: 8,
            batch: Some(500),
            seed,
            ..Default::default()
        };
        let runs = [
            run_source_only(&s.features, &ys, &t.features, &cfg).unwrap(),
            run_sa_baseline(&s.features, &ys, &t.features, &cfg).unwrap(),
            run_prda(&s.features, &ys, &t.features, &cfg).unwrap(),
        ];
        for (total, run) in totals.iter_mut().zip(&runs) {
            *total += accuracy(&run.target_predictions, &yt).unwrap();
        }
    }
    totals.map(|t| t / 10.0)
}

#[test]
fn rotated_mixture_orders_the_methods() {
    let [source_only, sa, prda] = rotated_mixture_means();
    assert!(
        prda - source_only >= 0.05,
        "PrDA {prda} vs source-only {source_only}"
    );
    assert!(
        source_only <= sa && sa <= prda,
        "source-only {source_only}, SA {sa}, PrDA {prda}"
    );
}
