//! Monte Carlo convergence studies.
//!
//! Every study runs samples in parallel and reduces their results in sample
//! order, so a fixed configuration gives bitwise identical tables whatever
//! the thread count.

mod config;
mod noise_stats;
mod output;
mod studies;

pub use config::{InitialChoice, MmsAxis, StudyConfig, StudyKind};
pub use noise_stats::{noise_stats_study, MomentRow, NoiseStatsReport};
pub use output::{write_gnuplot, write_rate_csv, RATE_CSV_HEADER};
pub use studies::{
    lockstep, mms_study, single_run, spatial_convergence_study, temporal_convergence_study, EnergyTrace,
    StudyReport,
};

use crate::error::{invalid, Error, Result};
use crate::fem::{Discretization, NormKind, Prolongation};
use crate::stepper::Checkpoint;

/// Squared error maxima of one sample: `‖u‖²_{L²}`, `|u|²_{H¹}`, `‖v‖²_{L²}`.
pub type ErrorSquares = [f64; 3];

pub const COLUMNS: [&str; 3] = ["u_l2", "u_h1", "v_l2"];

/// `orderᵢ = log₂(errorᵢ₋₁ / errorᵢ)` for a ladder refined by 2.
pub fn estimate_rate(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(invalid(format!("errors must be positive and finite, got {e}")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Maxima over the checkpoints of `a` (`n ≥ 1`) of the squared distances to
/// the reference states at the same times. Both are measured in `target`'s
/// space; `a` is prolonged when it lives on a coarser nested mesh.
pub fn error_norms(a: &[Checkpoint], reference: &[Checkpoint], target: &Discretization) -> Result<ErrorSquares> {
    let mut out = [0.0f64; 3];
    let mut transfer: Option<Prolongation> = None;
    for cp in a.iter().filter(|c| c.n >= 1) {
        let r = reference
            .iter()
            .find(|r| (r.t - cp.t).abs() <= 1e-12 * cp.t.max(1.0))
            .ok_or_else(|| invalid(format!("no reference state at t = {}", cp.t)))?;
        if !r.u.dofmap().same_space(target.dofmap()) {
            return Err(invalid("reference states do not live on the target mesh"));
        }
        let (u, v) = if cp.u.dofmap().same_space(target.dofmap()) {
            (cp.u.coeffs().to_vec(), cp.v.coeffs().to_vec())
        } else {
            if transfer.is_none() {
                transfer = Some(Prolongation::new(cp.u.dofmap(), target.dofmap())?);
            }
            let p = transfer.as_ref().expect("just built");
            (p.apply_raw(cp.u.coeffs()), p.apply_raw(cp.v.coeffs()))
        };
        let du: Vec<f64> = u.iter().zip(r.u.coeffs()).map(|(x, y)| x - y).collect();
        let dv: Vec<f64> = v.iter().zip(r.v.coeffs()).map(|(x, y)| x - y).collect();
        let e = squared_norms(target, &du, &dv);
        for k in 0..3 {
            out[k] = out[k].max(e[k]);
        }
    }
    Ok(out)
}

pub(crate) fn squared_norms(d: &Discretization, du: &[f64], dv: &[f64]) -> ErrorSquares {
    [
        d.norm_raw(du, NormKind::L2).powi(2),
        d.norm_raw(du, NormKind::H1Semi).powi(2),
        d.norm_raw(dv, NormKind::L2).powi(2),
    ]
}

/// One row per resolution, coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Samples that entered the averages.
    pub samples: usize,
    pub failed_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    /// `τ` or `h`.
    pub resolution: f64,
    pub label: String,
    /// `sqrt(mean of squared maxima)` per column.
    pub errors: [f64; 3],
    pub orders: [Option<f64>; 3],
    /// Monte Carlo standard error of each entry of `errors`.
    pub stderr: [f64; 3],
}

impl RateTable {
    /// Builds the table from per-level, per-sample squared maxima.
    pub fn from_samples(levels: &[(f64, String)], per_sample: &[Vec<ErrorSquares>], failed: usize) -> Result<Self> {
        if per_sample.is_empty() || per_sample.iter().any(|s| s.len() != levels.len()) {
            return Err(invalid("every sample needs one error triple per level"));
        }
        let mut rows = Vec::with_capacity(levels.len());
        for (l, (resolution, label)) in levels.iter().enumerate() {
            let mut errors = [0.0; 3];
            let mut stderr = [0.0; 3];
            for k in 0..3 {
                let xs: Vec<f64> = per_sample.iter().map(|s| s[l][k]).collect();
                let (mean, se) = mean_and_stderr(&xs);
                errors[k] = mean.sqrt();
                // Delta method for the square root.
                stderr[k] = if mean > 0.0 { se / (2.0 * mean.sqrt()) } else { 0.0 };
            }
            rows.push(RateRow {
                resolution: *resolution,
                label: label.clone(),
                errors,
                orders: [None; 3],
                stderr,
            });
        }
        for k in 0..3 {
            let col: Vec<f64> = rows.iter().map(|r| r.errors[k]).collect();
            if let Ok(orders) = estimate_rate(&col) {
                for (i, o) in orders.into_iter().enumerate() {
                    rows[i + 1].orders[k] = Some(o);
                }
            }
        }
        Ok(Self {
            rows,
            samples: per_sample.len(),
            failed_samples: failed,
        })
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors[k]).collect()
    }

    /// Mean of the last two orders of column `k` (the last one if only one).
    pub fn observed_order(&self, k: usize) -> Option<f64> {
        let orders: Vec<f64> = self.rows.iter().filter_map(|r| r.orders[k]).collect();
        match orders.len() {
            0 => None,
            1 => Some(orders[0]),
            n => Some(0.5 * (orders[n - 2] + orders[n - 1])),
        }
    }
}

/// Sample mean and the standard error of the mean (zero for one sample).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Splits per-sample outcomes into successes and a failure count; aborts when
/// more than `max_fraction` of the samples failed. Errors other than step
/// failures propagate.
pub(crate) fn collect_samples<T>(results: Vec<Result<T>>, max_fraction: f64) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) if is_step_failure(&e) => {
                log::warn!("sample {i} failed: {e}");
                failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if failed as f64 > max_fraction * total as f64 || ok.is_empty() {
        return Err(Error::StudyAborted { failed, total });
    }
    Ok((ok, failed))
}

fn is_step_failure(e: &Error) -> bool {
    match e {
        Error::StepFailure { .. } => true,
        Error::AtStep { source, .. } => is_step_failure(source),
        _ => false,
    }
}
