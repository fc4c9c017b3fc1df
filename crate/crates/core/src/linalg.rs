//! Sparse kernels shared by the model and the integrators.
//!
//! Matrices are stored as `sprs` CSR matrices. The symmetric positive
//! definite solves go through [`EnvelopeCholesky`], a profile (skyline)
//! Cholesky factorization. On the structured grids assembled here the
//! natural node ordering is banded, so the envelope stays narrow.

use sprs::{CsMat, TriMat};

pub type SparseMatrix = CsMat<f64>;

/// `y = A x` for a CSR matrix.
pub fn mul_vec(a: &SparseMatrix, x: &[f64], y: &mut [f64]) {
    debug_assert!(a.is_csr());
    debug_assert_eq!(a.cols(), x.len());
    debug_assert_eq!(a.rows(), y.len());
    for (row, vec) in a.outer_iterator().enumerate() {
        y[row] = vec.iter().map(|(col, &v)| v * x[col]).sum();
    }
}

/// `y = Aᵀ x` for a CSR matrix.
pub fn mul_vec_transpose(a: &SparseMatrix, x: &[f64], y: &mut [f64]) {
    debug_assert!(a.is_csr());
    debug_assert_eq!(a.rows(), x.len());
    debug_assert_eq!(a.cols(), y.len());
    y.iter_mut().for_each(|v| *v = 0.0);
    for (row, vec) in a.outer_iterator().enumerate() {
        let xr = x[row];
        for (col, &v) in vec.iter() {
            y[col] += v * xr;
        }
    }
}

/// Extracts the block `A[rows, cols]` as a new CSR matrix.
pub fn submatrix(a: &SparseMatrix, rows: &[usize], cols: &[usize]) -> SparseMatrix {
    let mut col_map = vec![usize::MAX; a.cols()];
    for (j, &c) in cols.iter().enumerate() {
        col_map[c] = j;
    }
    let mut tri = TriMat::new((rows.len(), cols.len()));
    for (i, &r) in rows.iter().enumerate() {
        if let Some(vec) = a.outer_view(r) {
            for (c, &v) in vec.iter() {
                let j = col_map[c];
                if j != usize::MAX {
                    tri.add_triplet(i, j, v);
                }
            }
        }
    }
    tri.to_csr()
}

/// Builds a CSR matrix from a dense row-major slice, dropping exact zeros.
pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> SparseMatrix {
    assert_eq!(rows * cols, data.len());
    let mut tri = TriMat::new((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let v = data[i * cols + j];
            if v != 0.0 {
                tri.add_triplet(i, j, v);
            }
        }
    }
    tri.to_csr()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `‖x − y‖₂`
pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Largest entrywise asymmetry `|a_ij − a_ji|` of a square CSR matrix.
pub fn asymmetry(a: &SparseMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for (i, vec) in a.outer_iterator().enumerate() {
        for (j, &v) in vec.iter() {
            let t = a.get(j, i).copied().unwrap_or(0.0);
            worst = worst.max((v - t).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    NotSquare { rows: usize, cols: usize },
    NotSymmetric { asymmetry: f64 },
    NotPositiveDefinite { pivot: usize, value: f64 },
}

impl std::fmt::Display for FactorError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FactorError::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            FactorError::NotSymmetric { asymmetry } => {
                write!(f, "matrix is not symmetric (max asymmetry {asymmetry:e})")
            }
            FactorError::NotPositiveDefinite { pivot, value } => {
                write!(f, "non-positive pivot {value:e} at row {pivot}")
            }
        }
    }
}

/// Cholesky factor `A = L Lᵀ` stored row-wise over the lower envelope.
///
/// Row `i` of `L` occupies columns `first[i]..=i`; fill-in never leaves the
/// envelope of the input matrix.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self, FactorError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(FactorError::NotSquare {
                rows: n,
                cols: a.cols(),
            });
        }
        let a = if a.is_csr() { a.clone() } else { a.to_csr() };
        let scale = a.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let asym = asymmetry(&a);
        if asym > 1e-12 * scale {
            return Err(FactorError::NotSymmetric { asymmetry: asym });
        }

        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        let mut len = 0;
        for (i, row) in a.outer_iterator().enumerate() {
            let f = row.indices().iter().copied().filter(|&j| j <= i).min().unwrap_or(i);
            first.push(f);
            start.push(len);
            len += i - f + 1;
        }
        start.push(len);

        let mut values = vec![0.0; len];
        for (i, row) in a.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                if j <= i {
                    values[start[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let diag_in = values[start[i] + i - fi];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[start[i] + j - fi];
                for k in k0..j {
                    s -= values[start[i] + k - fi] * values[start[j] + k - fj];
                }
                values[start[i] + j - fi] = s / values[start[j] + j - fj];
            }
            let mut d = diag_in;
            for k in fi..i {
                let l = values[start[i] + k - fi];
                d -= l * l;
            }
            if !(d > 1e-14 * diag_in.abs()) || !d.is_finite() {
                return Err(FactorError::NotPositiveDefinite { pivot: i, value: d });
            }
            values[start[i] + i - fi] = d.sqrt();
        }

        Ok(Self { first, start, values })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn l(&self, i: usize, k: usize) -> f64 {
        self.values[self.start[i] + k - self.first[i]]
    }

    /// Overwrites `x` (holding `b`) with `A⁻¹ b`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n, "rhs length does not match factor dimension");
        for i in 0..n {
            let mut s = x[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * x[k];
            }
            x[i] = s / self.l(i, i);
        }
        for i in (0..n).rev() {
            let xi = x[i] / self.l(i, i);
            x[i] = xi;
            for k in self.first[i]..i {
                x[k] -= self.l(i, k) * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
