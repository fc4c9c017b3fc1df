#![allow(dead_code)]

use eddy_pint::linalg::{from_dense, SparseMatrix};
use eddy_pint::model::SemiDiscreteSystem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sparse, strictly diagonally dominant symmetric stiffness with a
/// random conducting subset and a winding on the non-conducting unknowns.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize) -> (SemiDiscreteSystem, DMatrix<f64>) {
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(0.25) {
                let v: f64 = rng.random_range(-1.0..1.0);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| k[(i, j)].abs()).sum();
        k[(i, i)] = off + rng.random_range(0.1..2.0);
    }
    let mut m: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(0.5..2.0)
            } else {
                0.0
            }
        })
        .collect();
    m[0] = 1.0;
    m[n - 1] = 0.0;
    let x: Vec<f64> = m
        .iter()
        .map(|&mj| if mj == 0.0 { rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let sys = SemiDiscreteSystem::new(m, to_sparse(&k), x).unwrap();
    (sys, k)
}

pub fn to_sparse(k: &DMatrix<f64>) -> SparseMatrix {
    let (r, c) = k.shape();
    let row_major: Vec<f64> = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| k[(i, j)])
        .collect();
    from_dense(r, c, &row_major)
}

pub fn dense(k: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k.rows(), k.cols());
    for (i, row) in k.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            d[(i, j)] += v;
        }
    }
    d
}

pub fn select(k: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| k[(rows[i], cols[j])])
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
