//! Subspace geometry on the Grassmann manifold: chordal distance, greedy
//! matching of two subspace collections, the closed-form alignment transform
//! and projection of samples onto (aligned) subspaces.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::linalg::{Basis, Matrix};
use crate::subspaces::SubspaceCollection;

/// Chordal distance `sqrt(k − Σᵢⱼ (bᵢᵀ·uⱼ)²)` between two k-dimensional
/// orthonormal bases.
///
/// The radicand is evaluated as the squared residual of projecting each
/// basis onto the other, averaged over both directions, which avoids the
/// cancellation of the subtraction for nearby subspaces.
pub fn chordal_distance(bs: &Basis, bu: &Basis) -> Result<f64> {
    check_compatible(bs, bu)?;
    let k = bs.k() as f64;
    let forward = residual_sq(&bs.vectors, &bu.vectors)?;
    let backward = residual_sq(&bu.vectors, &bs.vectors)?;
    Ok((0.5 * (forward + backward)).clamp(0.0, k).sqrt())
}

/// `‖A − B·(BᵀA)‖²_F`.
fn residual_sq(a: &Matrix, b: &Matrix) -> Result<f64> {
    let coords = b.t_matmul(a)?;
    let residual = a.sub(&b.matmul(&coords)?)?;
    Ok(residual.as_slice().iter().map(|v| v * v).sum())
}

fn check_compatible(bs: &Basis, bu: &Basis) -> Result<()> {
    if bs.k() != bu.k() || bs.ambient_dim() != bu.ambient_dim() {
        return shape_err(format!(
            "subspaces differ: k {} vs {}, ambient dimension {} vs {}",
            bs.k(),
            bu.k(),
            bs.ambient_dim(),
            bu.ambient_dim()
        ));
    }
    Ok(())
}

/// Anything samples can be projected through: a d×k matrix and a centering vector.
pub trait Projector {
    fn vectors(&self) -> &Matrix;
    fn mean(&self) -> &[f64];
}

impl Projector for Basis {
    fn vectors(&self) -> &Matrix {
        &self.vectors
    }
    fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// Source basis carried into a target's coordinate frame, `Bs·A*`.
///
/// Its columns are generally not orthonormal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetAligned {
    pub vectors: Matrix,
    pub mean: Vec<f64>,
}

impl Projector for TargetAligned {
    fn vectors(&self) -> &Matrix {
        &self.vectors
    }
    fn mean(&self) -> &[f64] {
        &self.mean
    }
}

impl TargetAligned {
    /// Orthonormal basis for the same column span (modified Gram-Schmidt,
    /// two passes). Degenerate columns are replaced from the canonical basis.
    pub fn reorthonormalized(&self) -> TargetAligned {
        let (d, k) = self.vectors.shape();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut candidates: Vec<Vec<f64>> = (0..k).map(|j| self.vectors.column(j)).collect();
        candidates.extend((0..d).map(|a| {
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            e
        }));
        for mut v in candidates {
            if cols.len() == k {
                break;
            }
            let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if scale == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for c in &cols {
                    let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(c).for_each(|(x, c)| *x -= dot * c);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 * scale.max(1.0) {
                v.iter_mut().for_each(|x| *x /= norm);
                cols.push(v);
            }
        }
        let mut vectors = Matrix::zeros(d, k);
        for (j, c) in cols.iter().enumerate() {
            for (r, v) in c.iter().enumerate() {
                vectors.set(r, j, *v);
            }
        }
        TargetAligned {
            vectors,
            mean: self.mean.clone(),
        }
    }
}

/// Closed-form minimizer `A* = Bsᵀ·Bu` of `‖Bs·A − Bu‖_F` and the
/// target-aligned basis `Bs·A*`, which keeps the source mean.
pub fn compute_alignment(bs: &Basis, bu: &Basis) -> Result<(Matrix, TargetAligned)> {
    check_compatible(bs, bu)?;
    let transform = bs.vectors.t_matmul(&bu.vectors)?;
    let vectors = bs.vectors.matmul(&transform)?;
    Ok((
        transform,
        TargetAligned {
            vectors,
            mean: bs.mean.clone(),
        },
    ))
}

/// `(X − mean)·V` for every row of `x`.
pub fn project<P: Projector + ?Sized>(x: &Matrix, p: &P) -> Result<Matrix> {
    let v = p.vectors();
    let mean = p.mean();
    if x.cols() != v.rows() {
        return shape_err(format!(
            "samples have {} features, subspace ambient dimension is {}",
            x.cols(),
            v.rows()
        ));
    }
    let k = v.cols();
    let mut out = Matrix::zeros(x.rows(), k);
    let mut centered = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for ((c, a), m) in centered.iter_mut().zip(x.row(r)).zip(mean) {
            *c = a - m;
        }
        let out_row = out.row_mut(r);
        for (f, &c) in centered.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, &w) in out_row.iter_mut().zip(v.row(f)) {
                *o += c * w;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub source_idx: usize,
    pub target_idx: usize,
    /// A* = Bsᵀ·Bu (k×k).
    pub transform: Matrix,
    pub target_aligned: TargetAligned,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Pairs in selection order.
    pub pairs: Vec<AlignedPair>,
    pub unmatched_source: Vec<usize>,
    pub unmatched_target: Vec<usize>,
    /// Full source×target chordal distance table.
    pub distances: Vec<Vec<f64>>,
}

/// Greedy matching on a distance table: repeatedly take the smallest
/// remaining entry, ties broken by lower row then lower column.
pub fn greedy_match(distances: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = distances.len();
    let cols = distances.first().map_or(0, Vec::len);
    let mut entries: Vec<(f64, usize, usize)> = distances
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &d)| (d, i, j)))
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut pairs = Vec::with_capacity(rows.min(cols));
    for (_, i, j) in entries {
        if pairs.len() == rows.min(cols) {
            break;
        }
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

pub fn distance_table(ms: &SubspaceCollection, mu: &SubspaceCollection) -> Result<Vec<Vec<f64>>> {
    ms.bases()
        .map(|bs| mu.bases().map(|bu| chordal_distance(bs, bu)).collect())
        .collect()
}

/// Greedy minimum-chordal-distance matching of source and virtual subspaces,
/// each pair carrying its alignment transform and target-aligned basis.
pub fn match_subspaces(ms: &SubspaceCollection, mu: &SubspaceCollection) -> Result<Matching> {
    if ms.k != mu.k {
        return shape_err(format!("collections use k = {} and k = {}", ms.k, mu.k));
    }
    let distances = distance_table(ms, mu)?;
    let mut pairs = Vec::new();
    for (i, j) in greedy_match(&distances) {
        let (transform, target_aligned) =
            compute_alignment(&ms.subspaces[i].basis, &mu.subspaces[j].basis)?;
        pairs.push(AlignedPair {
            source_idx: i,
            target_idx: j,
            transform,
            target_aligned,
            distance: distances[i][j],
        });
    }
    let unmatched_source = (0..ms.len())
        .filter(|i| !pairs.iter().any(|p| p.source_idx == *i))
        .collect();
    let unmatched_target = (0..mu.len())
        .filter(|j| !pairs.iter().any(|p| p.target_idx == *j))
        .collect();
    Ok(Matching {
        pairs,
        unmatched_source,
        unmatched_target,
        distances,
    })
}

impl Matching {
    /// Pair index handling each source subspace. Unmatched source subspaces
    /// are routed to the pair whose source subspace is closest to them.
    pub fn source_routes(&self, ms: &SubspaceCollection) -> Result<Vec<usize>> {
        self.routes(ms, |p| p.source_idx)
    }

    /// Pair index handling each virtual subspace, routing unmatched ones to
    /// the pair whose virtual subspace is closest.
    pub fn target_routes(&self, mu: &SubspaceCollection) -> Result<Vec<usize>> {
        self.routes(mu, |p| p.target_idx)
    }

    fn routes(
        &self,
        collection: &SubspaceCollection,
        side: impl Fn(&AlignedPair) -> usize,
    ) -> Result<Vec<usize>> {
        let mut routes = Vec::with_capacity(collection.len());
        for (s, sub) in collection.subspaces.iter().enumerate() {
            if let Some(p) = self.pairs.iter().position(|p| side(p) == s) {
                routes.push(p);
                continue;
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (p, pair) in self.pairs.iter().enumerate() {
                let d = chordal_distance(&sub.basis, &collection.subspaces[side(pair)].basis)?;
                if d < best_d {
                    best_d = d;
                    best = p;
                }
            }
            routes.push(best);
        }
        Ok(routes)
    }
}
