//! Mixup interpolation and virtual intermediate domains.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PrdaError, Result};
use crate::linalg::Matrix;

/// Strictly decreasing mixing weights, one per progressive round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaSchedule(Vec<f64>);

impl LambdaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(PrdaError::Config("lambda schedule is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(PrdaError::Config(format!(
                "lambda {v} is outside the open interval (0, 1)"
            )));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(PrdaError::Config(format!(
                "lambda schedule {values:?} is not strictly decreasing"
            )));
        }
        Ok(Self(values))
    }

    /// Parses a comma-separated list such as `0.8,0.6,0.4,0.2`.
    pub fn parse(list: &str) -> Result<Self> {
        let values = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| PrdaError::Config(format!("bad lambda '{s}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self(vec![0.8, 0.6, 0.4, 0.2])
    }
}

impl TryFrom<Vec<f64>> for LambdaSchedule {
    type Error = PrdaError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LambdaSchedule> for Vec<f64> {
    fn from(s: LambdaSchedule) -> Self {
        s.0
    }
}

/// How drawn source and target batches are combined into virtual samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// One virtual sample per position of the shuffled batches.
    #[default]
    Zip,
    /// Every source row of the batch with every target row.
    Cross,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualDomain {
    pub samples: Matrix,
    pub lambda: f64,
    pub source_indices: Vec<usize>,
    pub target_indices: Vec<usize>,
}

#[inline]
fn mix(a: f64, b: f64, lambda: f64) -> f64 {
    // Rounding can push the combination an ulp past its endpoints.
    (lambda * a + (1.0 - lambda) * b).clamp(a.min(b), a.max(b))
}

/// `λ·x1 + (1−λ)·x2`, and the same combination of the label distributions
/// when both are given.
pub fn mixup_pair(
    x1: &[f64],
    x2: &[f64],
    y1: Option<&[f64]>,
    y2: Option<&[f64]>,
    lambda: f64,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if x1.len() != x2.len() {
        return shape_err(format!(
            "samples have lengths {} and {}",
            x1.len(),
            x2.len()
        ));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PrdaError::Config(format!(
            "lambda {lambda} is outside [0, 1]"
        )));
    }
    let x = x1
        .iter()
        .zip(x2)
        .map(|(&a, &b)| mix(a, b, lambda))
        .collect();
    let y = match (y1, y2) {
        (Some(a), Some(b)) => {
            if a.len() != b.len() {
                return shape_err(format!("labels have lengths {} and {}", a.len(), b.len()));
            }
            Some(a.iter().zip(b).map(|(&p, &q)| mix(p, q, lambda)).collect())
        }
        _ => None,
    };
    Ok((x, y))
}

fn draw_batch(rng: &mut ChaCha8Rng, n: usize, batch: usize) -> Vec<usize> {
    if n >= batch {
        index::sample(rng, n, batch).into_vec()
    } else {
        (0..batch).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Draws a batch from each domain and mixes them with weight `lambda` on the
/// source side. No labels are produced.
pub fn generate_virtual_domain(
    xs: &Matrix,
    xt: &Matrix,
    lambda: f64,
    batch: usize,
    seed: u64,
    pairing: Pairing,
) -> Result<VirtualDomain> {
    if xs.rows() == 0 || xt.rows() == 0 {
        return Err(PrdaError::DegenerateInput(
            "cannot mix with an empty domain".into(),
        ));
    }
    if xs.cols() != xt.cols() {
        return shape_err(format!(
            "source has {} features, target has {}",
            xs.cols(),
            xt.cols()
        ));
    }
    if batch == 0 {
        return Err(PrdaError::Config("batch must be at least 1".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(PrdaError::Config(format!(
            "lambda {lambda} is outside the open interval (0, 1)"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = draw_batch(&mut rng, xs.rows(), batch);
    let mut tgt = draw_batch(&mut rng, xt.rows(), batch);
    tgt.shuffle(&mut rng);

    let (source_indices, target_indices): (Vec<usize>, Vec<usize>) = match pairing {
        Pairing::Zip => (src, tgt),
        Pairing::Cross => src
            .iter()
            .flat_map(|&i| tgt.iter().map(move |&j| (i, j)))
            .unzip(),
    };

    let d = xs.cols();
    let mut data = Vec::with_capacity(source_indices.len() * d);
    for (&i, &j) in source_indices.iter().zip(&target_indices) {
        data.extend(
            xs.row(i)
                .iter()
                .zip(xt.row(j))
                .map(|(&a, &b)| mix(a, b, lambda)),
        );
    }
    Ok(VirtualDomain {
        samples: Matrix::from_raw(source_indices.len(), d, data),
        lambda,
        source_indices,
        target_indices,
    })
}
