//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Used as the source classifier over raw features, as the per-pair
//! classifier over projected features, and as the domain probe.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PrdaError, Result};
use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Carried for reproducibility records; full-batch descent from zero
    /// weights does not consume randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PrdaError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(PrdaError::Config("epochs must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(PrdaError::Config(format!(
                "l2 must be non-negative, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Times the step size was halved after a step that increased the loss.
    pub lr_halvings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// (d+1)×K; the last row holds the biases.
    pub weights: Matrix,
    pub classes: usize,
    pub feature_dim: usize,
    /// L2 strength the model was trained with (applies to non-bias rows).
    pub l2: f64,
    #[serde(default)]
    pub summary: TrainSummary,
}

const MODEL_FORMAT: &str = "prda-softmax";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelBlob {
    format: String,
    version: u32,
    model: SoftmaxModel,
}

impl SoftmaxModel {
    pub fn zeros(feature_dim: usize, classes: usize) -> Self {
        Self {
            weights: Matrix::zeros(feature_dim + 1, classes),
            classes,
            feature_dim,
            l2: 0.0,
            summary: TrainSummary::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelBlob {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let blob: ModelBlob =
            serde_json::from_str(s).map_err(|e| PrdaError::Data(format!("bad model blob: {e}")))?;
        if blob.format != MODEL_FORMAT || blob.version != MODEL_VERSION {
            return Err(PrdaError::Data(format!(
                "unsupported model blob {} v{}",
                blob.format, blob.version
            )));
        }
        Ok(blob.model)
    }

    pub fn predict_proba(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.feature_dim {
            return shape_err(format!(
                "model expects {} features, got {}",
                self.feature_dim,
                z.cols()
            ));
        }
        Ok(softmax_rows(&logits(&self.weights, z)))
    }

    /// Argmax label and its probability for every row.
    pub fn predict(&self, z: &Matrix) -> Result<Vec<(usize, f64)>> {
        let p = self.predict_proba(z)?;
        Ok(p.row_iter().map(argmax).collect())
    }
}

/// Index and value of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    (best, row[best])
}

fn logits(weights: &Matrix, z: &Matrix) -> Matrix {
    let d = z.cols();
    let k = weights.cols();
    let bias = weights.row(d);
    let mut out = Matrix::zeros(z.rows(), k);
    for r in 0..z.rows() {
        let o = out.row_mut(r);
        o.copy_from_slice(bias);
        for (f, &x) in z.row(r).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (oc, &w) in o.iter_mut().zip(weights.row(f)) {
                *oc += x * w;
            }
        }
    }
    out
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    p
}

/// Mean cross-entropy plus `l2/2·‖W‖²` over non-bias rows, and its gradient.
pub fn loss_and_gradient(
    weights: &Matrix,
    z: &Matrix,
    labels: &[usize],
    l2: f64,
) -> Result<(f64, Matrix)> {
    let (n, d) = z.shape();
    let k = weights.cols();
    if weights.rows() != d + 1 {
        return shape_err(format!(
            "weights have {} rows, expected {}",
            weights.rows(),
            d + 1
        ));
    }
    if labels.len() != n {
        return shape_err(format!("{} labels for {n} samples", labels.len()));
    }
    let logit = logits(weights, z);
    let mut grad = Matrix::zeros(d + 1, k);
    let mut loss = 0.0;
    let mut delta = vec![0.0; k];
    for (r, &y) in labels.iter().enumerate() {
        let row = logit.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        for (c, dc) in delta.iter_mut().enumerate() {
            *dc = (row[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
        }
        for (f, &x) in z.row(r).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (g, &dc) in grad.row_mut(f).iter_mut().zip(&delta) {
                *g += x * dc;
            }
        }
        for (g, &dc) in grad.row_mut(d).iter_mut().zip(&delta) {
            *g += dc;
        }
    }
    let inv_n = 1.0 / n.max(1) as f64;
    loss *= inv_n;
    let mut reg = 0.0;
    for f in 0..d {
        for c in 0..k {
            let w = weights.get(f, c);
            reg += w * w;
            let g = grad.get(f, c) * inv_n + l2 * w;
            grad.set(f, c, g);
        }
    }
    for c in 0..k {
        let g = grad.get(d, c) * inv_n;
        grad.set(d, c, g);
    }
    Ok((loss + 0.5 * l2 * reg, grad))
}

fn validate_training_data(z: &Matrix, labels: &[usize]) -> Result<()> {
    if z.rows() != labels.len() {
        return shape_err(format!("{} labels for {} samples", labels.len(), z.rows()));
    }
    if z.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(PrdaError::Data(
            "training features contain non-finite values".into(),
        ));
    }
    let first = labels.first().copied().unwrap_or(0);
    if labels.iter().all(|&l| l == first) {
        return Err(PrdaError::SingleClass(first));
    }
    Ok(())
}

/// Trains with the class count inferred as `max(label) + 1`.
pub fn train(z: &Matrix, labels: &[usize], cfg: &TrainConfig) -> Result<SoftmaxModel> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    train_with_classes(z, labels, classes, cfg)
}

/// Full-batch gradient descent from zero weights. A step that would raise
/// the loss is retried with half the step size, so the loss never increases.
pub fn train_with_classes(
    z: &Matrix,
    labels: &[usize],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<SoftmaxModel> {
    cfg.validate()?;
    validate_training_data(z, labels)?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(PrdaError::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let d = z.cols();
    let mut weights = Matrix::zeros(d + 1, classes);
    let (mut loss, mut grad) = loss_and_gradient(&weights, z, labels, cfg.l2)?;
    let initial_loss = loss;
    let mut lr = cfg.learning_rate;
    let mut lr_halvings = 0;

    'epochs: for _ in 0..cfg.epochs {
        loop {
            let step = grad.scale(-lr);
            let candidate = weights.add(&step)?;
            let (next_loss, next_grad) = loss_and_gradient(&candidate, z, labels, cfg.l2)?;
            if next_loss <= loss {
                weights = candidate;
                loss = next_loss;
                grad = next_grad;
                break;
            }
            lr *= 0.5;
            lr_halvings += 1;
            if lr < 1e-12 {
                break 'epochs;
            }
        }
    }
    if lr_halvings > 0 {
        debug!("learning rate halved {lr_halvings} times to {lr:e}");
    }

    Ok(SoftmaxModel {
        weights,
        classes,
        feature_dim: d,
        l2: cfg.l2,
        summary: TrainSummary {
            initial_loss,
            final_loss: loss,
            lr_halvings,
        },
    })
}

/// Largest absolute gap between the analytic gradient at the model's
/// weights and a central finite-difference estimate (step 1e-5).
pub fn gradient_check(model: &SoftmaxModel, z: &Matrix, labels: &[usize]) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let (_, analytic) = loss_and_gradient(&model.weights, z, labels, model.l2)?;
    let mut worst: f64 = 0.0;
    let mut w = model.weights.clone();
    for r in 0..w.rows() {
        for c in 0..w.cols() {
            let orig = w.get(r, c);
            w.set(r, c, orig + STEP);
            let (up, _) = loss_and_gradient(&w, z, labels, model.l2)?;
            w.set(r, c, orig - STEP);
            let (down, _) = loss_and_gradient(&w, z, labels, model.l2)?;
            w.set(r, c, orig);
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max((numeric - analytic.get(r, c)).abs());
        }
    }
    Ok(worst)
}
