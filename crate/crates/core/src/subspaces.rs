//! Multiple subspace generation.
//!
//! A domain is covered by a sequence of k-dimensional PCA subspaces. Each
//! round fits the current working set, peels off the samples whose relative
//! reconstruction error exceeds `tau`, refits on the samples it keeps, and
//! recurses on the peeled-off ones until fewer than `k` remain.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{PrdaError, Result};
use crate::linalg::{pca_top_k, reconstruction_error, Basis, Matrix};

/// One subspace of a domain together with the samples it explains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub basis: Basis,
    /// Sample indices (into the domain matrix) owned by this subspace, ascending.
    pub members: Vec<usize>,
    /// Number of samples the basis was fit on.
    pub fit_size: usize,
    /// The refit set had fewer than k samples, so the basis is the pre-refit fit.
    pub refit_skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCollection {
    pub subspaces: Vec<Subspace>,
    /// Owning subspace index for every input sample.
    pub assignment: Vec<usize>,
    pub tau: f64,
    pub k: usize,
    /// Iterations that had to force a sample into the retained set.
    pub forced_moves: usize,
    pub iterations: usize,
}

impl SubspaceCollection {
    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn bases(&self) -> impl Iterator<Item = &Basis> {
        self.subspaces.iter().map(|s| &s.basis)
    }
}

pub fn generate_subspaces(x: &Matrix, k: usize, tau: f64) -> Result<SubspaceCollection> {
    let n = x.rows();
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(PrdaError::Config(format!(
            "tau = {tau} is outside the valid range (0, 1]"
        )));
    }
    if k == 0 {
        return Err(PrdaError::DegenerateInput("k must be at least 1".into()));
    }
    if n < k {
        return Err(PrdaError::DegenerateInput(format!(
            "{n} samples cannot support a {k}-dimensional subspace"
        )));
    }

    let mut subspaces: Vec<Subspace> = Vec::new();
    let mut working: Vec<usize> = (0..n).collect();
    let mut forced_moves = 0;
    let mut iterations = 0;

    while working.len() >= k {
        iterations += 1;
        assert!(iterations <= n, "subspace generation failed to terminate");

        let basis = pca_top_k(&x.select_rows(&working), k, true)?;
        let errors = working
            .iter()
            .map(|&i| reconstruction_error(x.row(i), &basis, true))
            .collect::<Result<Vec<f64>>>()?;

        let mut high: Vec<bool> = errors.iter().map(|&e| e > tau).collect();
        if high.iter().all(|&h| h) {
            // Keep the best-explained sample so the working set shrinks.
            let best = errors
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("working set is non-empty");
            high[best] = false;
            forced_moves += 1;
            warn!(
                "every sample exceeds tau = {tau} under its own fit; retaining the best-explained one"
            );
        }

        let (retained, peeled): (Vec<usize>, Vec<usize>) = {
            let mut r = Vec::new();
            let mut p = Vec::new();
            for (&idx, &h) in working.iter().zip(&high) {
                if h {
                    p.push(idx);
                } else {
                    r.push(idx);
                }
            }
            (r, p)
        };

        let (basis, fit_size, refit_skipped) = if retained.len() >= k {
            let refit = pca_top_k(&x.select_rows(&retained), k, true)?;
            (refit, retained.len(), false)
        } else {
            (basis, working.len(), true)
        };

        subspaces.push(Subspace {
            basis,
            members: retained,
            fit_size,
            refit_skipped,
        });
        working = peeled;
    }

    // Tail samples (< k) go to whichever subspace explains them best.
    for &i in &working {
        let mut best = 0;
        let mut best_err = f64::INFINITY;
        for (s, sub) in subspaces.iter().enumerate() {
            let e = reconstruction_error(x.row(i), &sub.basis, true)?;
            if e < best_err {
                best_err = e;
                best = s;
            }
        }
        subspaces[best].members.push(i);
    }

    let mut assignment = vec![usize::MAX; n];
    for (s, sub) in subspaces.iter_mut().enumerate() {
        sub.members.sort_unstable();
        for &i in &sub.members {
            assignment[i] = s;
        }
    }
    debug_assert!(assignment.iter().all(|&a| a != usize::MAX));

    Ok(SubspaceCollection {
        subspaces,
        assignment,
        tau,
        k,
        forced_moves,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    pub count: usize,
    pub sizes: Vec<usize>,
    /// Mean relative reconstruction error of each subspace's members.
    pub mean_residual: Vec<f64>,
}

/// Summarizes a collection against the data it was generated from.
pub fn collection_stats(collection: &SubspaceCollection, x: &Matrix) -> Result<CollectionStats> {
    let mut mean_residual = Vec::with_capacity(collection.len());
    for sub in &collection.subspaces {
        let mut total = 0.0;
        for &i in &sub.members {
            total += reconstruction_error(x.row(i), &sub.basis, true)?;
        }
        mean_residual.push(if sub.members.is_empty() {
            0.0
        } else {
            total / sub.members.len() as f64
        });
    }
    Ok(CollectionStats {
        count: collection.len(),
        sizes: collection
            .subspaces
            .iter()
            .map(|s| s.members.len())
            .collect(),
        mean_residual,
    })
}
