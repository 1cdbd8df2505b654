use crate::error::{invalid, Result};

use super::dense::DenseMatrix;

/// Accumulates `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, capacity: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn finalize(self) -> Result<SparseMatrix> {
        self.build(false)
    }

    /// Finalizes and verifies that the assembled entries are exactly
    /// symmetric, setting the matrix's symmetry flag.
    pub fn finalize_symmetric(self) -> Result<SparseMatrix> {
        self.build(true)
    }

    fn build(mut self, symmetric: bool) -> Result<SparseMatrix> {
        let n = self.n;
        if let Some(&(r, c, _)) = self.entries.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(invalid(format!("entry ({r}, {c}) outside a {n}×{n} matrix")));
        }
        // Stable sort: contributions to (i, j) and (j, i) are summed in the
        // same insertion order, so symmetric element matrices assemble into an
        // exactly symmetric global matrix.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len() / 2);
        let mut values = Vec::with_capacity(self.entries.len() / 2);
        let mut k = 0;
        while k < self.entries.len() {
            let (r, c, mut v) = self.entries[k];
            k += 1;
            while k < self.entries.len() && self.entries[k].0 == r && self.entries[k].1 == c {
                v += self.entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        };
        if symmetric {
            if !m.check_symmetric() {
                return Err(invalid("assembled matrix is not exactly symmetric"));
            }
            Ok(SparseMatrix { symmetric: true, ..m })
        } else {
            Ok(m)
        }
    }
}

/// Square sparse matrix in compressed-row form with sorted column indices and
/// no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when the matrix was verified exactly symmetric at construction.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Bitwise check `A[i][j] == A[j][i]` over the stored pattern.
    pub fn check_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y += alpha · A x`.
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi += alpha * acc;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `alpha·self + beta·other` over the union of both patterns.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.n != other.n {
            return Err(invalid(format!("dimension mismatch {} vs {}", self.n, other.n)));
        }
        let mut t = TripletBuilder::with_capacity(self.n, self.nnz() + other.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.add(i, j, alpha * v);
            }
            for (j, v) in other.row(i) {
                t.add(i, j, beta * v);
            }
        }
        if self.symmetric && other.symmetric {
            t.finalize_symmetric()
        } else {
            t.finalize()
        }
    }

    /// Symmetric Dirichlet elimination: the listed rows and columns are
    /// zeroed and their diagonal set to one.
    pub fn eliminate(&self, constrained: &[bool]) -> Result<SparseMatrix> {
        if constrained.len() != self.n {
            return Err(invalid("constraint mask length differs from matrix dimension"));
        }
        let mut t = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            if constrained[i] {
                t.add(i, i, 1.0);
                continue;
            }
            for (j, v) in self.row(i) {
                if !constrained[j] {
                    t.add(i, j, v);
                }
            }
        }
        if self.symmetric {
            t.finalize_symmetric()
        } else {
            t.finalize()
        }
    }

    /// `Aᵀ x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d.set(i, j, v);
            }
        }
        d
    }
}
