//! Sparse symmetric linear algebra.
//!
//! [`SparseMatrix`] is a compressed-row matrix assembled from triplets.
//! [`SolverHandle`] wraps a prepared SPD system (an envelope Cholesky factor
//! or a Jacobi-preconditioned conjugate-gradient context) that can be shared
//! across threads and reused for any number of right-hand sides.

mod cg;
mod cholesky;
pub mod dense;
mod ordering;
mod sparse;

pub use cg::JacobiCg;
pub use cholesky::EnvelopeCholesky;
pub use dense::{dense_oracle_solve, DenseMatrix};
pub use ordering::reverse_cuthill_mckee;
pub use sparse::{SparseMatrix, TripletBuilder};

use crate::error::{invalid, Result};

/// Relative residual target shared by every solve.
pub const SOLVER_TOLERANCE: f64 = 1e-12;

/// How a [`SolverHandle`] was prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Envelope Cholesky factorization after a reverse Cuthill–McKee ordering.
    Cholesky,
    /// Conjugate gradients with a Jacobi (diagonal) preconditioner.
    JacobiCg,
}

#[derive(Debug)]
enum Prepared {
    Cholesky(EnvelopeCholesky),
    Cg(JacobiCg),
}

/// Prepared SPD system, immutable after construction.
///
/// `solve` allocates its own work vectors, so one handle can serve many
/// threads at once.
#[derive(Debug)]
pub struct SolverHandle {
    prepared: Prepared,
    dim: usize,
    tolerance: f64,
}

impl SolverHandle {
    pub fn kind(&self) -> SolverKind {
        match self.prepared {
            Prepared::Cholesky(_) => SolverKind::Cholesky,
            Prepared::Cg(_) => SolverKind::JacobiCg,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim];
        self.solve_into(b, &mut x)?;
        Ok(x)
    }

    /// Solves into `x`; for the iterative variant `x` is overwritten, not used
    /// as an initial guess, so results never depend on caller state.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        if b.len() != self.dim || x.len() != self.dim {
            return Err(invalid(format!(
                "right-hand side has length {} (solution {}), system dimension is {}",
                b.len(),
                x.len(),
                self.dim
            )));
        }
        match &self.prepared {
            Prepared::Cholesky(f) => {
                f.solve_into(b, x);
                Ok(())
            }
            Prepared::Cg(cg) => cg.solve_into(b, x, self.tolerance),
        }
    }
}

/// Prepares `a` with the default strategy (envelope Cholesky).
pub fn prepare_spd(a: &SparseMatrix) -> Result<SolverHandle> {
    prepare_spd_with(a, SolverKind::Cholesky)
}

pub fn prepare_spd_with(a: &SparseMatrix, kind: SolverKind) -> Result<SolverHandle> {
    if a.n() == 0 {
        return Err(invalid("cannot prepare an empty system"));
    }
    if !a.is_symmetric() && !a.check_symmetric() {
        return Err(invalid("matrix is not symmetric"));
    }
    let prepared = match kind {
        SolverKind::Cholesky => Prepared::Cholesky(EnvelopeCholesky::factor(a, &reverse_cuthill_mckee(a))?),
        SolverKind::JacobiCg => Prepared::Cg(JacobiCg::new(a.clone())?),
    };
    Ok(SolverHandle {
        prepared,
        dim: a.n(),
        tolerance: SOLVER_TOLERANCE,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
