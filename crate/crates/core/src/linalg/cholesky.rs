use crate::error::{Error, Result};

use super::{dot, SparseMatrix};

/// Envelope (skyline) Cholesky factor `P A Pᵀ = L Lᵀ`.
///
/// Row `i` of `L` is stored densely from its first structural nonzero up to
/// the diagonal. Fill stays inside the envelope, which is narrow after a
/// bandwidth-reducing ordering of a finite element matrix.
#[derive(Debug)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    values: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.n();
        assert_eq!(perm.len(), n);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                let col = inv[j];
                if col < first[new] {
                    first[new] = col;
                }
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for i in 0..n {
            row_start.push(row_start[i] + (i - first[i] + 1));
        }

        let mut values = vec![0.0; row_start[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let col = inv[j];
                if col <= new {
                    values[row_start[new] + col - first[new]] = v;
                }
            }
        }

        let mut inv_diag = vec![0.0; n];
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = values.split_at_mut(row_start[i]);
            let row = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let lj = &done[row_start[j]..row_start[j + 1]];
                let s = row[j - fi] - dot(&row[k0 - fi..j - fi], &lj[k0 - fj..j - fj]);
                row[j - fi] = s * inv_diag[j];
            }
            let d = row[i - fi] - dot(&row[..i - fi], &row[..i - fi]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotSpd { row: perm[i], pivot: d });
            }
            let l = d.sqrt();
            row[i - fi] = l;
            inv_diag[i] = 1.0 / l;
        }

        Ok(Self {
            n,
            perm: perm.to_vec(),
            first,
            row_start,
            values,
            inv_diag,
        })
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.row_start[i]..self.row_start[i + 1] - 1];
            y[i] = (y[i] - dot(row, &y[fi..i])) * self.inv_diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i] * self.inv_diag[i];
            y[i] = xi;
            let row = &self.values[self.row_start[i]..self.row_start[i + 1] - 1];
            for (yk, l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}
