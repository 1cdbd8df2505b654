//! Small dense matrices and a Gaussian-elimination oracle for tests.

use crate::error::{invalid, Error, Result};

/// Largest system the dense oracle accepts.
pub const DENSE_ORACLE_MAX_DIM: usize = 200;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("dense matrix rows must all have length n"));
        }
        Ok(Self {
            n,
            data: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Intended as an independent check on the sparse solvers; refuses systems
/// larger than [`DENSE_ORACLE_MAX_DIM`].
pub fn dense_oracle_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n();
    if n > DENSE_ORACLE_MAX_DIM {
        return Err(invalid(format!("dense oracle limited to n ≤ {DENSE_ORACLE_MAX_DIM}, got {n}")));
    }
    if b.len() != n {
        return Err(invalid(format!("right-hand side length {} for a {n}×{n} system", b.len())));
    }
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = n.max(1) as f64 * f64::EPSILON * scale;
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .expect("non-empty range");
        let pivot = m[pivot_row * n + col];
        if !(pivot.abs() > threshold) {
            return Err(Error::SingularMatrix { column: col });
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / pivot;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| m[col * n + k] * x[k]).sum();
        x[col] = (x[col] - s) / m[col * n + col];
    }
    Ok(x)
}
