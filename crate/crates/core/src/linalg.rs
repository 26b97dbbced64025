//! Dense row-major matrices and the PCA kernel used by subspace generation.
//!
//! Everything here is a pure function of its inputs. PCA goes through a thin
//! SVD of the (optionally centered) sample matrix, so it stays stable when the
//! working set has fewer rows than columns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PrdaError, Result};

/// Row-major dense matrix of finite reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return shape_err(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(PrdaError::Data(format!(
                "non-finite value at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return shape_err(format!("row {i} has {} columns, expected {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Internal constructor for data produced by arithmetic on finite inputs.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return shape_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return shape_err(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for r in 0..self.rows {
            let right = rhs.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(right) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_raw(indices.len(), self.cols, data)
    }

    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return shape_err(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            ));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix::from_raw(self.rows + other.rows, self.cols, data))
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        if self.rows == 0 {
            return mean;
        }
        for row in self.row_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * s).collect(),
        )
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return shape_err(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                rhs.shape()
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix::from_raw(self.rows, self.cols, data))
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.add(&rhs.scale(-1.0))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// An orthonormal basis of a k-dimensional subspace plus its centering vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    /// d×k matrix whose columns are the basis vectors.
    pub vectors: Matrix,
    /// Length-d centering vector subtracted before projecting.
    pub mean: Vec<f64>,
    /// Per-column variance of the fitting data along each basis vector.
    pub explained_variance: Vec<f64>,
    /// Set when the data had fewer than k nonzero singular values and the
    /// trailing columns are an arbitrary orthonormal completion.
    pub rank_deficient: bool,
}

impl Basis {
    /// Wraps explicit vectors, checking column orthonormality to 1e-8.
    pub fn new(vectors: Matrix, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != vectors.rows() {
            return shape_err(format!(
                "mean has length {}, basis ambient dimension is {}",
                mean.len(),
                vectors.rows()
            ));
        }
        if vectors.cols() > vectors.rows() {
            return shape_err(format!(
                "basis has {} vectors in dimension {}",
                vectors.cols(),
                vectors.rows()
            ));
        }
        let err = orthonormality_error(&vectors);
        if err > 1e-8 {
            return Err(PrdaError::Data(format!(
                "basis columns are not orthonormal (max deviation {err:e})"
            )));
        }
        let k = vectors.cols();
        Ok(Self {
            vectors,
            mean,
            explained_variance: vec![0.0; k],
            rank_deficient: false,
        })
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.vectors.rows()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.vectors.cols()
    }
}

/// `max |WᵀW − I|` over all entries.
pub fn orthonormality_error(w: &Matrix) -> f64 {
    let gram = w.t_matmul(w).expect("square gram");
    let mut worst: f64 = 0.0;
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram.get(i, j) - target).abs());
        }
    }
    worst
}

/// Top-k principal directions of `x`, ordered by decreasing variance.
///
/// Each column is sign-normalized so that its largest-magnitude entry is
/// non-negative (first such entry on ties). When the data supports fewer than
/// `k` directions, the remaining columns are completed deterministically from
/// the canonical basis and `rank_deficient` is set.
pub fn pca_top_k(x: &Matrix, k: usize, center: bool) -> Result<Basis> {
    let (n, d) = x.shape();
    if k == 0 {
        return Err(PrdaError::DegenerateInput("k must be at least 1".into()));
    }
    if n < k {
        return Err(PrdaError::DegenerateInput(format!(
            "{n} samples cannot support {k} principal components"
        )));
    }
    if k > d {
        return shape_err(format!("k = {k} exceeds ambient dimension {d}"));
    }

    let mean = if center {
        x.column_means()
    } else {
        vec![0.0; d]
    };
    let mut centered = x.to_nalgebra();
    if center {
        for (j, m) in mean.iter().enumerate() {
            centered.column_mut(j).add_scalar_mut(-m);
        }
    }

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let sv_max = order.first().map_or(0.0, |&i| sv[i]);
    let tol = sv_max * (n.max(d) as f64) * f64::EPSILON;
    let denom = if center {
        (n.max(2) - 1) as f64
    } else {
        n as f64
    };

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variance = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        if sv[i] <= tol || sv[i] == 0.0 {
            break;
        }
        columns.push(v_t.row(i).iter().copied().collect());
        variance.push(sv[i] * sv[i] / denom);
    }
    let rank_deficient = columns.len() < k;
    if rank_deficient {
        complete_orthonormal(&mut columns, d, k);
        variance.resize(k, 0.0);
    }

    let mut vectors = Matrix::zeros(d, k);
    for (j, col) in columns.iter_mut().enumerate() {
        apply_sign_convention(col);
        for (r, v) in col.iter().enumerate() {
            vectors.set(r, j, *v);
        }
    }

    Ok(Basis {
        vectors,
        mean,
        explained_variance: variance,
        rank_deficient,
    })
}

fn apply_sign_convention(col: &mut [f64]) {
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Extends `columns` to `k` orthonormal vectors using canonical unit vectors
/// and two passes of modified Gram-Schmidt.
fn complete_orthonormal(columns: &mut Vec<Vec<f64>>, d: usize, k: usize) {
    for axis in 0..d {
        if columns.len() >= k {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for _ in 0..2 {
            for c in columns.iter() {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(x, c)| *x -= dot * c);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            columns.push(v);
        }
    }
}

/// Squared residual of `x` after projecting onto the basis.
///
/// With `relative`, the residual is divided by the squared norm of the
/// centered sample, giving a value in `[0, 1]`; a sample equal to the mean
/// counts as perfectly explained.
pub fn reconstruction_error(x: &[f64], basis: &Basis, relative: bool) -> Result<f64> {
    if x.len() != basis.ambient_dim() {
        return shape_err(format!(
            "sample has length {}, basis ambient dimension is {}",
            x.len(),
            basis.ambient_dim()
        ));
    }
    let centered: Vec<f64> = x.iter().zip(&basis.mean).map(|(a, m)| a - m).collect();
    let w = &basis.vectors;
    let k = w.cols();
    let mut coords = vec![0.0; k];
    for (r, c) in centered.iter().enumerate() {
        for (j, coord) in coords.iter_mut().enumerate() {
            *coord += c * w.get(r, j);
        }
    }
    let mut residual = 0.0;
    let mut norm_sq = 0.0;
    for (r, c) in centered.iter().enumerate() {
        let recon: f64 = (0..k).map(|j| w.get(r, j) * coords[j]).sum();
        let e = c - recon;
        residual += e * e;
        norm_sq += c * c;
    }
    if !relative {
        return Ok(residual);
    }
    if norm_sq == 0.0 {
        return Ok(0.0);
    }
    Ok((residual / norm_sq).clamp(0.0, 1.0))
}

pub fn frobenius_distance(p: &Matrix, q: &Matrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return shape_err(format!(
            "cannot compare {:?} with {:?}",
            p.shape(),
            q.shape()
        ));
    }
    Ok(p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot.abs() / (na * nb)).min(1.0).acos().to_degrees()
    }

    #[test]
    fn identity_rows_give_orthonormal_basis() {
        let x = Matrix::identity(3);
        let b = pca_top_k(&x, 2, false).unwrap();
        assert_eq!(b.k(), 2);
        assert!(orthonormality_error(&b.vectors) < 1e-12);
    }

    #[test]
    fn line_data_recovers_axis_with_positive_sign() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 - 37.0, 0.0, 0.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let b = pca_top_k(&x, 1, true).unwrap();
        assert_eq!(b.vectors.column(0), vec![1.0, 0.0, 0.0]);
        assert!(!b.rank_deficient);
    }

    #[test]
    fn too_few_rows_is_degenerate() {
        let x = Matrix::identity(2);
        assert!(matches!(
            pca_top_k(&x, 3, true),
            Err(PrdaError::DegenerateInput(_))
        ));
    }

    #[test]
    fn rank_deficient_is_padded_and_flagged() {
        // Two distinct points centered span a single direction.
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 0.0, 0.0], vec![3.0, 2.0, 0.0, 0.0]]).unwrap();
        let b = pca_top_k(&x, 2, true).unwrap();
        assert!(b.rank_deficient);
        assert!(orthonormality_error(&b.vectors) < 1e-12);
        assert_eq!(b.vectors.column(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.explained_variance[1], 0.0);
    }

    #[test]
    fn anisotropic_gaussian_axes_match_covariance_eigenvectors() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let stds = [3.0, 1.0, 0.1];
        let mut data = Vec::new();
        for _ in 0..500 {
            for s in stds {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(s * z);
            }
        }
        let x = Matrix::from_vec(500, 3, data).unwrap();
        let b = pca_top_k(&x, 2, true).unwrap();
        let oracle = covariance_eigenvectors(&x);
        for j in 0..2 {
            assert!(angle_deg(&b.vectors.column(j), &oracle[j]) < 1e-6);
            let mut axis = vec![0.0; 3];
            axis[j] = 1.0;
            assert!(angle_deg(&b.vectors.column(j), &axis) < 5.0);
        }
        assert!(b.explained_variance[0] >= b.explained_variance[1]);
    }

    /// Jacobi eigendecomposition of the sample covariance, sorted by
    /// decreasing eigenvalue.
    fn covariance_eigenvectors(x: &Matrix) -> Vec<Vec<f64>> {
        let d = x.cols();
        let mean = x.column_means();
        let mut c = vec![vec![0.0; d]; d];
        for row in x.row_iter() {
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        let mut v = vec![vec![0.0; d]; d];
        for (i, r) in v.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        for _ in 0..100 {
            for p in 0..d {
                for q in p + 1..d {
                    if c[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (c[q][q] - c[p][p]) / (2.0 * c[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let cs = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * cs;
                    for row in c.iter_mut() {
                        let (ckp, ckq) = (row[p], row[q]);
                        row[p] = cs * ckp - sn * ckq;
                        row[q] = sn * ckp + cs * ckq;
                    }
                    #[allow(clippy::needless_range_loop)]
                    for k in 0..d {
                        let (cpk, cqk) = (c[p][k], c[q][k]);
                        c[p][k] = cs * cpk - sn * cqk;
                        c[q][k] = sn * cpk + cs * cqk;
                    }
                    for row in v.iter_mut() {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = cs * vp - sn * vq;
                        row[q] = sn * vp + cs * vq;
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| c[b][b].total_cmp(&c[a][a]));
        idx.iter()
            .map(|&j| v.iter().map(|r| r[j]).collect())
            .collect()
    }

    #[test]
    fn reconstruction_error_cases() {
        let e1 = Basis::new(
            Matrix::from_vec(3, 1, vec![1.0, 0.0, 0.0]).unwrap(),
            vec![0.0; 3],
        )
        .unwrap();
        assert_eq!(
            reconstruction_error(&[1.0, 1.0, 0.0], &e1, false).unwrap(),
            1.0
        );
        assert_eq!(
            reconstruction_error(&[5.0, 0.0, 0.0], &e1, true).unwrap(),
            0.0
        );
        assert_eq!(
            reconstruction_error(&[0.0, 2.0, -1.0], &e1, true).unwrap(),
            1.0
        );
        assert_eq!(
            reconstruction_error(&[0.0, 0.0, 0.0], &e1, true).unwrap(),
            0.0
        );
        assert!(reconstruction_error(&[0.0, 0.0], &e1, true).is_err());
    }

    #[test]
    fn frobenius_distance_cases() {
        let i2 = Matrix::identity(2);
        assert_eq!(frobenius_distance(&i2, &i2).unwrap(), 0.0);
        let d = frobenius_distance(&i2, &Matrix::zeros(2, 2)).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(frobenius_distance(&i2, &Matrix::zeros(2, 3)).is_err());

        let p =
            Matrix::from_vec(3, 3, vec![0.3, -1.2, 2.0, 0.7, 0.1, -0.4, 1.5, 2.2, -3.1]).unwrap();
        let q =
            Matrix::from_vec(3, 3, vec![1.0, 0.5, -0.5, 0.0, 0.2, 0.9, -1.1, 0.3, 0.8]).unwrap();
        let mut oracle = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                oracle += (p.get(r, c) - q.get(r, c)).powi(2);
            }
        }
        assert!((frobenius_distance(&p, &q).unwrap() - oracle.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn from_vec_rejects_nan() {
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(PrdaError::Data(_))
        ));
    }

    #[test]
    fn matmul_and_transpose_agree() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let via_t = a.transpose().matmul(&b).unwrap();
        assert_eq!(a.t_matmul(&b).unwrap(), via_t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
            (3usize..12, 2usize..8).prop_flat_map(|(n, d)| {
                (
                    Just(n),
                    Just(d),
                    prop::collection::vec(-10.0f64..10.0, n * d),
                )
            })
        }

        proptest! {
            #[test]
            fn pca_is_orthonormal_sorted_and_deterministic((n, d, data) in matrix_strategy(), k_raw in 1usize..8) {
                let k = k_raw.min(d).min(n);
                let x = Matrix::from_vec(n, d, data).unwrap();
                let b = pca_top_k(&x, k, true).unwrap();
                prop_assert!(orthonormality_error(&b.vectors) < 1e-8);
                for w in b.explained_variance.windows(2) {
                    prop_assert!(w[0] >= w[1]);
                }
                let again = pca_top_k(&x, k, true).unwrap();
                prop_assert_eq!(b, again);
            }

            #[test]
            fn relative_error_in_unit_interval((n, d, data) in matrix_strategy(), probe in prop::collection::vec(-5.0f64..5.0, 8)) {
                let x = Matrix::from_vec(n, d, data).unwrap();
                let b = pca_top_k(&x, 1, true).unwrap();
                let e = reconstruction_error(&probe[..d], &b, true).unwrap();
                prop_assert!((0.0..=1.0).contains(&e));
            }
        }
    }
}
