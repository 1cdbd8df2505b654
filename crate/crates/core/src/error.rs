use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric positive definite (pivot {pivot} at row {row})")]
    NotSpd { row: usize, pivot: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("matrix is singular to machine precision (column {column})")]
    SingularMatrix { column: usize },

    #[error("non-finite field value at vertex {vertex} ({x}, {y})")]
    Evaluation { vertex: usize, x: f64, y: f64 },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("Picard iteration failed at step {step} after {} iterations (last residual {:.3e})", .residuals.len(), .residuals.last().copied().unwrap_or(f64::NAN))]
    StepFailure { step: usize, residuals: Vec<f64> },

    #[error("study aborted: {failed} of {total} samples failed")]
    StudyAborted { failed: usize, total: usize },

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
