use crate::error::{invalid, Error, Result};

use super::{dot, norm2, SparseMatrix};

/// Jacobi-preconditioned conjugate gradients with an iteration cap of `10·n`.
#[derive(Debug)]
pub struct JacobiCg {
    a: SparseMatrix,
    inv_diag: Vec<f64>,
}

impl JacobiCg {
    pub fn new(a: SparseMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::NotSpd { row: i, pivot: d })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, inv_diag })
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64], tol: f64) -> Result<()> {
        let n = self.a.n();
        if b.len() != n {
            return Err(invalid("right-hand side length mismatch"));
        }
        x.fill(0.0);
        let b_norm = norm2(b);
        if b_norm == 0.0 {
            return Ok(());
        }
        let target = tol * b_norm;
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let cap = 10 * n;
        for _ in 0..cap {
            self.a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NotSpd { row: 0, pivot: pap });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm2(&r) <= target {
                // the recursive residual drifts; confirm with the true one
                let ax = self.a.mul_vec(x);
                let true_res = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                if true_res <= target {
                    return Ok(());
                }
                for i in 0..n {
                    r[i] = b[i] - ax[i];
                }
            }
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::ConvergenceFailure {
            iterations: cap,
            residual: norm2(&r) / b_norm,
        })
    }
}
