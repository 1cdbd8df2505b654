//! Finite element and Monte Carlo machinery for nonlinear stochastic elastic
//! wave equations with multiplicative noise on rectangles.

pub mod ensemble;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod noise;
pub mod stepper;

pub use error::{Error, Result};
