use std::io::{self, Write};

use rayon::prelude::*;

use super::config::StudyConfig;
use super::mean_and_stderr;
use crate::error::{invalid, Result};
use crate::noise::{sample_increments, tilde_oracle, NoiseConfig, Sampler, StepSize, TILDE_ORACLE_BUDGET};

/// Empirical moment across the step ladder with its fitted `log₂` slope.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub name: &'static str,
    pub means: Vec<f64>,
    pub stderr: Vec<f64>,
    pub slope: f64,
    /// Admissible slope interval.
    pub target: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStatsReport {
    pub levels: Vec<StepSize>,
    pub draws: usize,
    /// `bar2, tilde2, hat2, diff2, tilde4, bar_tilde`.
    pub rows: Vec<MomentRow>,
    /// `E[(ΔW̃)²] / (τ³/3)` per level.
    pub tilde_ratio: Vec<f64>,
    /// `E[ΔW̄·ΔW̃] / (τ²/2)` per level.
    pub cross_ratio: Vec<f64>,
}

const ROWS: [(&str, (f64, f64)); 6] = [
    ("bar2", (0.9, 1.1)),
    ("tilde2", (2.8, 3.2)),
    ("hat2", (2.8, 3.2)),
    ("diff2", (4.5, f64::INFINITY)),
    ("tilde4", (5.6, 6.4)),
    ("bar_tilde", (1.8, 2.2)),
];

/// Relative tolerance of the per-level ratio checks.
pub const RATIO_TOLERANCE: f64 = 0.05;

impl NoiseStatsReport {
    pub fn row(&self, name: &str) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn ratios_pass(&self) -> bool {
        self.tilde_ratio
            .iter()
            .chain(&self.cross_ratio)
            .all(|r| (r - 1.0).abs() <= RATIO_TOLERANCE)
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass) && self.ratios_pass()
    }

    /// One CSV row per moment: the level means, slope, admissible slope range
    /// and verdict, then the same layout for standard errors and ratios.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        let taus: Vec<String> = self.levels.iter().map(|s| s.to_string()).collect();
        writeln!(w, "moment,{},slope,slope_min,slope_max,pass", taus.join(","))?;
        for r in &self.rows {
            let vals: Vec<String> = r.means.iter().map(|x| format!("{x:.6e}")).collect();
            writeln!(
                w,
                "{},{},{:.4},{},{},{}",
                r.name,
                vals.join(","),
                r.slope,
                r.target.0,
                r.target.1,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        for r in &self.rows {
            let vals: Vec<String> = r.stderr.iter().map(|x| format!("{x:.3e}")).collect();
            writeln!(w, "{}_stderr,{},,,,", r.name, vals.join(","))?;
        }
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(",");
        let verdict = |v: &[f64]| if v.iter().all(|r| (r - 1.0).abs() <= RATIO_TOLERANCE) { "PASS" } else { "FAIL" };
        writeln!(w, "tilde2_over_tau3_3,{},,0.95,1.05,{}", fmt(&self.tilde_ratio), verdict(&self.tilde_ratio))?;
        writeln!(w, "bar_tilde_over_tau2_2,{},,0.95,1.05,{}", fmt(&self.cross_ratio), verdict(&self.cross_ratio))?;
        Ok(())
    }
}

/// Least-squares slope of `log₂ y` against `log₂ x`.
pub fn log2_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().log2()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Moments of the increments over `cfg.draws` independent steps per ladder
/// level. `ΔŴ` comes from the subgrid sampler and `ΔW̃` from the bridge
/// refinement of the same path.
pub fn noise_stats_study(cfg: &StudyConfig) -> Result<NoiseStatsReport> {
    cfg.validate()?;
    if cfg.tau_ladder.len() < 2 {
        return Err(invalid("noise statistics need at least two ladder levels"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let mut per_level: Vec<[Vec<f64>; 6]> = Vec::new();
    for &step in &cfg.tau_ladder {
        let per_draw = step.subcount() as f64 * cfg.tilde_refinement as f64;
        let chunk = ((TILDE_ORACLE_BUDGET as f64 / per_draw).floor() as usize).clamp(1, 2000);
        let chunks = cfg.draws.div_ceil(chunk);
        let parts: Vec<Result<Vec<[f64; 6]>>> = pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let len = chunk.min(cfg.draws - c * chunk);
                    let nc = NoiseConfig::with_steps(len, step, cfg.seed, c as u64).with_sampler(Sampler::Subgrid);
                    let inc = sample_increments(&nc)?;
                    let tilde = tilde_oracle(&nc, cfg.tilde_refinement)?;
                    Ok((0..len)
                        .map(|i| {
                            let (b, t, h) = (inc.bar[i], tilde[i], inc.hat[i]);
                            [b * b, t * t, h * h, (t - h).powi(2), t.powi(4), b * t]
                        })
                        .collect())
                })
                .collect()
        });
        let mut cols: [Vec<f64>; 6] = Default::default();
        for part in parts {
            for d in part? {
                for k in 0..6 {
                    cols[k].push(d[k]);
                }
            }
        }
        per_level.push(cols);
    }
    let taus: Vec<f64> = cfg.tau_ladder.iter().map(|s| s.tau()).collect();
    let rows = ROWS
        .iter()
        .enumerate()
        .map(|(k, &(name, target))| {
            let (means, stderr): (Vec<f64>, Vec<f64>) = per_level.iter().map(|c| mean_and_stderr(&c[k])).unzip();
            let slope = log2_slope(&taus, &means);
            MomentRow {
                name,
                means,
                stderr,
                slope,
                target,
                pass: slope >= target.0 && slope <= target.1,
            }
        })
        .collect::<Vec<_>>();
    let tilde_ratio = rows[1].means.iter().zip(&taus).map(|(m, t)| m / (t.powi(3) / 3.0)).collect();
    let cross_ratio = rows[5].means.iter().zip(&taus).map(|(m, t)| m / (t * t / 2.0)).collect();
    Ok(NoiseStatsReport {
        levels: cfg.tau_ladder.clone(),
        draws: cfg.draws,
        rows,
        tilde_ratio,
        cross_ratio,
    })
}
