#![allow(dead_code)]

use prda::linalg::{Basis, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| normal(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Columns of a Gaussian matrix after classical Gram-Schmidt.
pub fn orthonormal(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Matrix {
    let g = gaussian(rng, d, k);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = g.column(j);
        for q in &cols {
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= dot * qi);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-8, "degenerate Gaussian draw");
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut m = Matrix::zeros(d, k);
    for (j, c) in cols.iter().enumerate() {
        for (r, v) in c.iter().enumerate() {
            m.set(r, j, *v);
        }
    }
    m
}

pub fn basis(vectors: Matrix) -> Basis {
    let d = vectors.rows();
    Basis::new(vectors, vec![0.0; d]).unwrap()
}

pub fn mean_of(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for row in x.row_iter() {
        m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= x.rows() as f64);
    m
}
