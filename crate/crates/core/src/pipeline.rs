//! Progressive domain augmentation.
//!
//! Each round mixes the current source with the target into a virtual
//! domain, aligns the source subspaces to the virtual ones, pseudo-labels the
//! virtual samples through per-pair classifiers, and absorbs the confident
//! ones into the source. The final classifier is retrained on the augmented
//! source and applied to the target in the original feature space.
//!
//! Target labels never enter this module; evaluation hooks receive only the
//! trained model.

use log::{info, warn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{train_with_classes, SoftmaxModel, TrainConfig};
use crate::error::{shape_err, PrdaError, Result};
use crate::grassmann::{match_subspaces, project, Matching, Projector, TargetAligned};
use crate::linalg::Matrix;
use crate::mixup::{generate_virtual_domain, LambdaSchedule, Pairing};
use crate::subspaces::{collection_stats, generate_subspaces, CollectionStats, SubspaceCollection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Subspace dimension; clamped per round to what the data supports.
    pub k: usize,
    /// Relative reconstruction-error threshold for subspace generation.
    pub tau: f64,
    /// Pseudo-labels are accepted only with confidence strictly above this.
    pub rho: f64,
    pub lambda_schedule: LambdaSchedule,
    /// Virtual batch size; `None` means `min(n_source, n_target, 256)`.
    pub batch: Option<usize>,
    pub classifier: TrainConfig,
    pub seed: u64,
    /// Train one classifier over all pairs instead of one per pair.
    pub shared_h: bool,
    pub reorthonormalize_ta: bool,
    pub pairing: Pairing,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 44,
            tau: 0.2,
            rho: 0.8,
            lambda_schedule: LambdaSchedule::default(),
            batch: None,
            classifier: TrainConfig::default(),
            seed: 0,
            shared_h: false,
            reorthonormalize_ta: false,
            pairing: Pairing::Zip,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(PrdaError::Config("k must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(PrdaError::Config(format!(
                "tau = {} is outside the valid range (0, 1]",
                self.tau
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(PrdaError::Config(format!(
                "rho = {} is outside the valid range (0, 1)",
                self.rho
            )));
        }
        if self.batch == Some(0) {
            return Err(PrdaError::Config("batch must be at least 1".into()));
        }
        self.classifier.validate()
    }

    pub fn batch_for(&self, n_source: usize, n_target: usize) -> usize {
        self.batch
            .unwrap_or_else(|| n_source.min(n_target).min(256))
            .max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub lambda: f64,
    pub k_used: usize,
    pub virtual_count: usize,
    pub accepted_count: usize,
    pub source_subspaces: usize,
    pub virtual_subspaces: usize,
    /// Chordal distance of every matched pair, in selection order.
    pub pair_distances: Vec<f64>,
    /// Pairs whose source members covered fewer than two classes.
    pub skipped_pairs: usize,
    pub source_size: usize,
    /// Accuracy of the round's source classifier on the target, when an
    /// evaluation hook was supplied.
    pub target_accuracy: Option<f64>,
    pub skipped: bool,
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Prda,
    SaBaseline,
    SourceOnly,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Prda => "prda",
            Method::SaBaseline => "sa",
            Method::SourceOnly => "source-only",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationResult {
    pub method: Method,
    /// For PrDA and source-only, the classifier over raw features; for the
    /// SA baseline, the classifier over projected target coordinates.
    pub model: SoftmaxModel,
    pub target_predictions: Vec<usize>,
    /// One report per schedule entry for PrDA; empty for the baselines.
    pub rounds: Vec<RoundReport>,
    pub source_stats: Option<CollectionStats>,
    pub final_source_size: usize,
    /// Confidence of every pseudo-labelled sample absorbed into the source.
    pub augmented_confidence: Vec<f64>,
    pub config: PipelineConfig,
}

fn class_count(ys: &[usize]) -> Result<usize> {
    let classes = ys.iter().copied().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(PrdaError::SingleClass(ys.first().copied().unwrap_or(0)));
    }
    Ok(classes)
}

fn check_inputs(xs: &Matrix, ys: &[usize], xt: &Matrix) -> Result<usize> {
    if xs.rows() != ys.len() {
        return shape_err(format!("{} labels for {} source rows", ys.len(), xs.rows()));
    }
    if xs.cols() != xt.cols() {
        return shape_err(format!(
            "source has {} features, target has {}",
            xs.cols(),
            xt.cols()
        ));
    }
    if xt.rows() == 0 || xs.rows() == 0 {
        return Err(PrdaError::DegenerateInput(
            "source and target must be non-empty".into(),
        ));
    }
    class_count(ys)
}

/// Largest usable subspace dimension for `eligible` samples in `d` dimensions.
fn clamp_k(k: usize, d: usize, eligible: usize) -> usize {
    k.min(d).min(eligible.saturating_sub(1))
}

/// Runs the full progressive augmentation loop.
pub fn run_prda(
    xs: &Matrix,
    ys: &[usize],
    xt: &Matrix,
    cfg: &PipelineConfig,
) -> Result<AdaptationResult> {
    run_prda_observed(xs, ys, xt, cfg, |_| None)
}

/// As [`run_prda`], calling `observe` with the source classifier after every
/// round; its return value is recorded as the round's target accuracy.
pub fn run_prda_observed<F>(
    xs: &Matrix,
    ys: &[usize],
    xt: &Matrix,
    cfg: &PipelineConfig,
    mut observe: F,
) -> Result<AdaptationResult>
where
    F: FnMut(&SoftmaxModel) -> Option<f64>,
{
    cfg.validate()?;
    let classes = check_inputs(xs, ys, xt)?;
    let d = xs.cols();

    let mut source = xs.clone();
    let mut labels = ys.to_vec();
    let mut model = train_with_classes(&source, &labels, classes, &cfg.classifier)?;
    let mut source_subspaces: Option<SubspaceCollection> = None;
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rounds = Vec::with_capacity(cfg.lambda_schedule.len());
    let mut augmented_confidence = Vec::new();
    let mut warned_clamp = false;

    for (round, &lambda) in cfg.lambda_schedule.values().iter().enumerate() {
        let round_seed = seeds.next_u64();
        let batch = cfg.batch_for(source.rows(), xt.rows());
        let virt = generate_virtual_domain(&source, xt, lambda, batch, round_seed, cfg.pairing)?;
        let n_virtual = virt.samples.rows();

        let k = clamp_k(cfg.k, d, source.rows().min(n_virtual));
        let mut report = RoundReport {
            round,
            lambda,
            k_used: k,
            virtual_count: n_virtual,
            accepted_count: 0,
            source_subspaces: 0,
            virtual_subspaces: 0,
            pair_distances: Vec::new(),
            skipped_pairs: 0,
            source_size: source.rows(),
            target_accuracy: None,
            skipped: false,
            note: None,
        };
        if k != cfg.k && !warned_clamp {
            warn!("subspace dimension clamped from {} to {k}", cfg.k);
            warned_clamp = true;
        }
        if k == 0 {
            warn!("round {round}: too few samples for any subspace; skipping");
            report.skipped = true;
            report.note = Some("virtual domain too small to form a subspace".into());
            report.target_accuracy = observe(&model);
            rounds.push(report);
            continue;
        }

        let ms = match source_subspaces.take() {
            Some(m) if m.k == k => m,
            _ => generate_subspaces(&source, k, cfg.tau)?,
        };
        let mu = generate_subspaces(&virt.samples, k, cfg.tau)?;
        let matching = match_subspaces(&ms, &mu)?;
        report.source_subspaces = ms.len();
        report.virtual_subspaces = mu.len();
        report.pair_distances = matching.pairs.iter().map(|p| p.distance).collect();

        let labelled = pseudo_label(
            &source,
            &labels,
            classes,
            &ms,
            &virt.samples,
            &mu,
            &matching,
            cfg,
            &mut report,
        )?;
        let accepted: Vec<(usize, usize, f64)> = labelled
            .into_iter()
            .filter(|&(_, _, conf)| conf > cfg.rho)
            .collect();
        report.accepted_count = accepted.len();

        if accepted.is_empty() {
            info!("round {round}: no pseudo-label above rho = {}", cfg.rho);
            report.note = Some("no pseudo-labels above rho; source unchanged".into());
            source_subspaces = Some(ms);
        } else {
            let rows: Vec<usize> = accepted.iter().map(|a| a.0).collect();
            source = source.vstack(&virt.samples.select_rows(&rows))?;
            labels.extend(accepted.iter().map(|a| a.1));
            augmented_confidence.extend(accepted.iter().map(|a| a.2));
            source_subspaces = Some(generate_subspaces(&source, k, cfg.tau)?);
            model = train_with_classes(&source, &labels, classes, &cfg.classifier)?;
        }
        report.source_size = source.rows();
        report.target_accuracy = observe(&model);
        rounds.push(report);
    }

    let source_stats = match &source_subspaces {
        Some(m) => Some(collection_stats(m, &source)?),
        None => None,
    };
    let target_predictions = model.predict(xt)?.into_iter().map(|(c, _)| c).collect();
    Ok(AdaptationResult {
        method: Method::Prda,
        model,
        target_predictions,
        rounds,
        source_stats,
        final_source_size: source.rows(),
        augmented_confidence,
        config: cfg.clone(),
    })
}

fn projector_for(pair_ta: &TargetAligned, reorthonormalize: bool) -> TargetAligned {
    if reorthonormalize {
        pair_ta.reorthonormalized()
    } else {
        pair_ta.clone()
    }
}

/// Rows of a collection's data that each pair is responsible for.
fn rows_per_pair(assignment: &[usize], routes: &[usize], pairs: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); pairs];
    for (i, &s) in assignment.iter().enumerate() {
        out[routes[s]].push(i);
    }
    out
}

/// Predicted (virtual row, label, confidence) for every virtual sample whose
/// pair has a usable classifier, sorted by row.
#[allow(clippy::too_many_arguments)]
fn pseudo_label(
    source: &Matrix,
    labels: &[usize],
    classes: usize,
    ms: &SubspaceCollection,
    virtual_samples: &Matrix,
    mu: &SubspaceCollection,
    matching: &Matching,
    cfg: &PipelineConfig,
    report: &mut RoundReport,
) -> Result<Vec<(usize, usize, f64)>> {
    let n_pairs = matching.pairs.len();
    let source_rows = rows_per_pair(&ms.assignment, &matching.source_routes(ms)?, n_pairs);
    let virtual_rows = rows_per_pair(&mu.assignment, &matching.target_routes(mu)?, n_pairs);

    let mut projected_source = Vec::with_capacity(n_pairs);
    let mut projected_virtual = Vec::with_capacity(n_pairs);
    for (p, pair) in matching.pairs.iter().enumerate() {
        let ta = projector_for(&pair.target_aligned, cfg.reorthonormalize_ta);
        projected_source.push(project(&source.select_rows(&source_rows[p]), &ta)?);
        let bu = &mu.subspaces[pair.target_idx].basis;
        projected_virtual.push(project(
            &virtual_samples.select_rows(&virtual_rows[p]),
            bu as &dyn Projector,
        )?);
    }

    let pair_labels =
        |p: usize| -> Vec<usize> { source_rows[p].iter().map(|&i| labels[i]).collect() };
    let distinct = |ls: &[usize]| ls.iter().any(|&l| l != ls[0]);

    let mut out = Vec::with_capacity(virtual_samples.rows());
    if cfg.shared_h {
        let mut z = Matrix::zeros(0, projected_source.first().map_or(0, Matrix::cols));
        let mut y = Vec::new();
        for (p, zs) in projected_source.iter().enumerate() {
            z = z.vstack(zs)?;
            y.extend(pair_labels(p));
        }
        if y.is_empty() || !distinct(&y) {
            report.skipped_pairs = n_pairs;
            return Ok(out);
        }
        let h = train_with_classes(&z, &y, classes, &cfg.classifier)?;
        for (p, zu) in projected_virtual.iter().enumerate() {
            for (&row, (label, conf)) in virtual_rows[p].iter().zip(h.predict(zu)?) {
                out.push((row, label, conf));
            }
        }
    } else {
        for p in 0..n_pairs {
            let y = pair_labels(p);
            if y.is_empty() || !distinct(&y) {
                report.skipped_pairs += 1;
                continue;
            }
            let h = train_with_classes(&projected_source[p], &y, classes, &cfg.classifier)?;
            for (&row, (label, conf)) in virtual_rows[p]
                .iter()
                .zip(h.predict(&projected_virtual[p])?)
            {
                out.push((row, label, conf));
            }
        }
    }
    out.sort_by_key(|r| r.0);
    Ok(out)
}

/// One-shot subspace alignment of the source straight onto the target, with
/// a single subspace per domain.
pub fn run_sa_baseline(
    xs: &Matrix,
    ys: &[usize],
    xt: &Matrix,
    cfg: &PipelineConfig,
) -> Result<AdaptationResult> {
    cfg.validate()?;
    let classes = check_inputs(xs, ys, xt)?;
    let k = clamp_k(cfg.k, xs.cols(), xs.rows().min(xt.rows()));
    if k == 0 {
        return Err(PrdaError::DegenerateInput(
            "too few samples to fit a subspace".into(),
        ));
    }
    let ms = generate_subspaces(xs, k, 1.0)?;
    let mt = generate_subspaces(xt, k, 1.0)?;
    let matching = match_subspaces(&ms, &mt)?;
    let pair = &matching.pairs[0];
    let ta = projector_for(&pair.target_aligned, cfg.reorthonormalize_ta);
    let zs = project(xs, &ta)?;
    let zt = project(xt, &mt.subspaces[pair.target_idx].basis)?;
    let model = train_with_classes(&zs, ys, classes, &cfg.classifier)?;
    let target_predictions = model.predict(&zt)?.into_iter().map(|(c, _)| c).collect();
    Ok(AdaptationResult {
        method: Method::SaBaseline,
        model,
        target_predictions,
        rounds: Vec::new(),
        source_stats: Some(collection_stats(&ms, xs)?),
        final_source_size: xs.rows(),
        augmented_confidence: Vec::new(),
        config: cfg.clone(),
    })
}

/// The source classifier applied to the target without adaptation.
pub fn run_source_only(
    xs: &Matrix,
    ys: &[usize],
    xt: &Matrix,
    cfg: &PipelineConfig,
) -> Result<AdaptationResult> {
    cfg.validate()?;
    let classes = check_inputs(xs, ys, xt)?;
    let model = train_with_classes(xs, ys, classes, &cfg.classifier)?;
    let target_predictions = model.predict(xt)?.into_iter().map(|(c, _)| c).collect();
    Ok(AdaptationResult {
        method: Method::SourceOnly,
        model,
        target_predictions,
        rounds: Vec::new(),
        source_stats: None,
        final_source_size: xs.rows(),
        augmented_confidence: Vec::new(),
        config: cfg.clone(),
    })
}

/// Fraction of predictions equal to the labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return shape_err(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        ));
    }
    if labels.is_empty() {
        return Err(PrdaError::DegenerateInput(
            "no labels to evaluate against".into(),
        ));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn evaluate(model: &SoftmaxModel, x: &Matrix, y: &[usize]) -> Result<f64> {
    if x.rows() != y.len() {
        return shape_err(format!("{} labels for {} rows", y.len(), x.rows()));
    }
    let predictions: Vec<usize> = model.predict(x)?.into_iter().map(|(c, _)| c).collect();
    accuracy(&predictions, y)
}
