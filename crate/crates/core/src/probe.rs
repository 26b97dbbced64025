//! Domain-divergence probe: how well a linear classifier tells two domains
//! apart under stratified cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{train_with_classes, TrainConfig};
use crate::error::{shape_err, PrdaError, Result};
use crate::linalg::Matrix;
use crate::pipeline::evaluate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub mean_accuracy: f64,
    /// Held-out accuracy of each fold, in fold order.
    pub folds: Vec<f64>,
}

/// Per-feature standardisation fitted on the training split only.
struct Scaler {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Scaler {
    fn fit(x: &Matrix) -> Self {
        let mean = x.column_means();
        let n = x.rows().max(1) as f64;
        let mut var = vec![0.0; x.cols()];
        for row in x.row_iter() {
            for ((v, &m), &a) in var.iter_mut().zip(&mean).zip(row) {
                *v += (a - m) * (a - m);
            }
        }
        let inv_std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((a, &m), &s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.inv_std) {
                *a = (*a - m) * s;
            }
        }
        out
    }
}

/// Fold index for every sample, stratified by label.
///
/// Within-class positions are shuffled with one permutation shared by all
/// classes and then dealt round-robin, so each fold holds every class share
/// to within one sample and the i-th members of different classes always
/// share a fold. Without the sharing, a domain probed against a copy of
/// itself scores below chance: every held-out row would meet its twin, with
/// the opposite label, in the training split.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let members: Vec<Vec<usize>> = (0..classes)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    let longest = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut rank: Vec<usize> = (0..longest).collect();
    rank.shuffle(&mut rng);

    let mut fold_of = vec![0usize; labels.len()];
    for class_members in &members {
        let mut order: Vec<usize> = (0..class_members.len()).collect();
        order.sort_by_key(|&w| rank[w]);
        for (pos, w) in order.into_iter().enumerate() {
            fold_of[class_members[w]] = pos % folds.max(1);
        }
    }
    fold_of
}

/// Labels rows of `a` as 0 and rows of `b` as 1, shuffles, and reports the
/// mean held-out accuracy of the softmax classifier over `folds` stratified
/// folds.
pub fn divergence_probe(
    a: &Matrix,
    b: &Matrix,
    folds: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<ProbeResult> {
    if a.cols() != b.cols() {
        return shape_err(format!(
            "domains have {} and {} features",
            a.cols(),
            b.cols()
        ));
    }
    if folds < 2 {
        return Err(PrdaError::Config(format!(
            "folds must be at least 2, got {folds}"
        )));
    }
    let smallest = a.rows().min(b.rows());
    if folds > smallest {
        return Err(PrdaError::Config(format!(
            "{folds} folds requested but the smaller domain has {smallest} samples"
        )));
    }
    cfg.validate()?;

    let x = a.vstack(b)?;
    let labels: Vec<usize> = (0..x.rows()).map(|i| usize::from(i >= a.rows())).collect();

    let fold_of = stratified_folds(&labels, folds, seed);

    let mut accuracies = Vec::with_capacity(folds);
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..x.rows()).partition(|&i| fold_of[i] == f);
        let train_x = x.select_rows(&train);
        let scaler = Scaler::fit(&train_x);
        let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let test_y: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
        let model = train_with_classes(&scaler.apply(&train_x), &train_y, 2, cfg)?;
        accuracies.push(evaluate(
            &model,
            &scaler.apply(&x.select_rows(&test)),
            &test_y,
        )?);
    }
    Ok(ProbeResult {
        mean_accuracy: accuracies.iter().sum::<f64>() / folds as f64,
        folds: accuracies,
    })
}
