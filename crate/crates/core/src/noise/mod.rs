//! Scalar Wiener paths and the per-step increment families of the scheme.
//!
//! For a step `τ = 1/d` every step `[tₙ, tₙ₊₁]` carries a subgrid of
//! `K = τ⁻²` left-anchored points `tₙ + ℓτ³`, `ℓ = 0..K`. With `B` the path
//! relative to `W(tₙ)` and `S = Σ_ℓ B(ℓτ³)`:
//!
//! * `ΔW̄ₙ = B(τ)`
//! * `ΔŴₙ = τ·W(tₙ₊₁) − τ³·Σ_ℓ W(tₙ + ℓτ³) = τ·ΔW̄ₙ − τ³·S`
//!
//! Normals are drawn from a counter-based stream keyed by
//! `(seed, purpose, sample_index, step)`, so each step's variates are fixed
//! regardless of how many steps or levels a caller asks for.

mod exact;
mod source;

use std::fmt;
use std::str::FromStr;

pub use source::{ChaChaNormals, NormalSource, Purpose, ZeroNormals};

use crate::error::{invalid, Error, Result};

/// Time step `τ = 1/denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepSize {
    denom: u64,
}

impl StepSize {
    /// Largest denominator accepted; keeps `τ⁻²` and step counters in range.
    pub const MAX_DENOMINATOR: u64 = 1 << 16;

    pub fn from_denominator(denom: u64) -> Result<Self> {
        if denom == 0 || denom > Self::MAX_DENOMINATOR {
            return Err(invalid(format!("step denominator {denom} outside 1..={}", Self::MAX_DENOMINATOR)));
        }
        Ok(Self { denom })
    }

    /// Accepts `τ` whose reciprocal is an integer to within `1e-9` relative.
    pub fn from_tau(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {tau}")));
        }
        let inv = 1.0 / tau;
        let d = inv.round();
        if (inv - d).abs() > 1e-9 * d || d < 1.0 {
            return Err(invalid(format!(
                "step size {tau} is not the reciprocal of an integer, so τ⁻² is not an integer substep count"
            )));
        }
        Self::from_denominator(d as u64)
    }

    pub fn denominator(&self) -> u64 {
        self.denom
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.denom as f64
    }

    /// Substeps per step, `K = τ⁻²`.
    pub fn subcount(&self) -> u64 {
        self.denom * self.denom
    }

    /// Subgrid spacing `τ³`.
    pub fn substep(&self) -> f64 {
        let t = self.tau();
        t * t * t
    }

    pub fn is_dyadic(&self) -> bool {
        self.denom.is_power_of_two()
    }

    /// `factor · τ`; `factor` must divide the denominator.
    pub fn coarsen(&self, factor: u64) -> Result<Self> {
        if factor == 0 || self.denom % factor != 0 {
            return Err(invalid(format!("cannot coarsen step {self} by {factor}")));
        }
        Self::from_denominator(self.denom / factor)
    }

    /// `τ / factor`.
    pub fn refine(&self, factor: u64) -> Result<Self> {
        self.denom
            .checked_mul(factor)
            .ok_or_else(|| invalid("step denominator overflow"))
            .and_then(Self::from_denominator)
    }
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.denom)
    }
}

/// How per-step increments are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Walk the `τ³` subgrid with independent `N(0, τ³)` sub-increments.
    #[default]
    Subgrid,
    /// Draw `(ΔW̄ₙ, S)` directly from their joint Gaussian law. Same
    /// distribution as [`Sampler::Subgrid`], cost independent of `τ⁻²`.
    Exact,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Subgrid => "subgrid",
            Sampler::Exact => "exact",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgrid" => Ok(Sampler::Subgrid),
            "exact" => Ok(Sampler::Exact),
            _ => Err(invalid(format!("unknown sampler '{s}' (expected subgrid or exact)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseConfig {
    pub step: StepSize,
    /// Number of steps `N`; the final time is `N·τ`.
    pub steps: usize,
    pub seed: u64,
    pub sample_index: u64,
    pub sampler: Sampler,
}

impl NoiseConfig {
    /// Requires `T/τ` to be an integer.
    pub fn new(t_final: f64, step: StepSize, seed: u64, sample_index: u64) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid(format!("final time must be positive, got {t_final}")));
        }
        let n = t_final * step.denominator() as f64;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * rounded.max(1.0) || rounded < 1.0 {
            return Err(invalid(format!("T = {t_final} is not an integer multiple of τ = {step}")));
        }
        Ok(Self::with_steps(rounded as usize, step, seed, sample_index))
    }

    pub fn with_steps(steps: usize, step: StepSize, seed: u64, sample_index: u64) -> Self {
        Self {
            step,
            steps,
            seed,
            sample_index,
            sampler: Sampler::default(),
        }
    }

    pub fn with_sampler(self, sampler: Sampler) -> Self {
        Self { sampler, ..self }
    }

    pub fn t_final(&self) -> f64 {
        self.steps as f64 * self.step.tau()
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("at least one step is required"));
        }
        Ok(())
    }

    fn path_source(&self) -> ChaChaNormals {
        ChaChaNormals::new(self.seed, Purpose::Path, self.sample_index)
    }
}

/// Increments of one path on one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSet {
    pub step: StepSize,
    /// `W(tₙ)`, `n = 0..=N`.
    pub endpoints: Vec<f64>,
    /// `ΔW̄ₙ`, `n = 0..N`.
    pub bar: Vec<f64>,
    /// `ΔŴₙ`, `n = 0..N`.
    pub hat: Vec<f64>,
}

impl IncrementSet {
    fn from_parts(step: StepSize, bar: Vec<f64>, sub_sums: &[f64]) -> Self {
        let tau = step.tau();
        let delta = step.substep();
        let mut endpoints = Vec::with_capacity(bar.len() + 1);
        endpoints.push(0.0);
        let mut w = 0.0;
        for b in &bar {
            w += b;
            endpoints.push(w);
        }
        let hat = bar.iter().zip(sub_sums).map(|(b, s)| tau * b - delta * s).collect();
        Self {
            step,
            endpoints,
            bar,
            hat,
        }
    }

    /// All-zero increments, the forced deterministic limit.
    pub fn zeros(step: StepSize, steps: usize) -> Self {
        Self {
            step,
            endpoints: vec![0.0; steps + 1],
            bar: vec![0.0; steps],
            hat: vec![0.0; steps],
        }
    }

    /// Prescribed increments; endpoints are their prefix sums.
    pub fn from_increments(step: StepSize, bar: Vec<f64>, hat: Vec<f64>) -> Result<Self> {
        if bar.len() != hat.len() {
            return Err(invalid("bar and hat increments differ in length"));
        }
        let mut s = Self::from_parts(step, bar, &vec![0.0; hat.len()]);
        s.hat = hat;
        Ok(s)
    }

    pub fn steps(&self) -> usize {
        self.bar.len()
    }
}

/// Increments of the path identified by `(seed, sample_index)`.
pub fn sample_increments(cfg: &NoiseConfig) -> Result<IncrementSet> {
    cfg.validate()?;
    match cfg.sampler {
        Sampler::Subgrid => sample_increments_with(cfg, &mut cfg.path_source()),
        Sampler::Exact => exact::sample(cfg, &mut cfg.path_source()),
    }
}

/// Subgrid sampling with an injected normal source.
pub fn sample_increments_with(cfg: &NoiseConfig, normals: &mut dyn NormalSource) -> Result<IncrementSet> {
    cfg.validate()?;
    let k = cfg.step.subcount();
    let sd = cfg.step.substep().sqrt();
    let mut bar = Vec::with_capacity(cfg.steps);
    let mut sums = Vec::with_capacity(cfg.steps);
    for n in 0..cfg.steps {
        normals.seek_step(n as u64);
        let (mut b, mut s) = (0.0, 0.0);
        for _ in 0..k {
            s += b;
            b += sd * normals.next_normal();
        }
        bar.push(b);
        sums.push(s);
    }
    Ok(IncrementSet::from_parts(cfg.step, bar, &sums))
}

/// Upper bound on `N·τ⁻²·refinement` for [`tilde_oracle`].
pub const TILDE_ORACLE_BUDGET: u64 = 100_000_000;

/// `ΔW̃ₙ = ∫ [W(tₙ₊₁) − W(s)] ds` by the trapezoid rule on a grid
/// `refinement` times finer than `τ³`, filled in by Brownian bridges on the
/// same path [`sample_increments`] produces with the subgrid sampler.
pub fn tilde_oracle(cfg: &NoiseConfig, refinement: usize) -> Result<Vec<f64>> {
    tilde_oracle_with(
        cfg,
        refinement,
        &mut cfg.path_source(),
        &mut ChaChaNormals::new(cfg.seed, Purpose::Bridge, cfg.sample_index),
    )
}

pub fn tilde_oracle_with(
    cfg: &NoiseConfig,
    refinement: usize,
    path: &mut dyn NormalSource,
    bridge: &mut dyn NormalSource,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if refinement < 4 {
        return Err(invalid(format!("bridge refinement must be at least 4, got {refinement}")));
    }
    let k = cfg.step.subcount();
    let work = (cfg.steps as u64).saturating_mul(k).saturating_mul(refinement as u64);
    if work > TILDE_ORACLE_BUDGET {
        return Err(Error::ResourceLimit(format!(
            "tilde oracle needs {work} bridge points, budget is {TILDE_ORACLE_BUDGET}"
        )));
    }
    let tau = cfg.step.tau();
    let delta = cfg.step.substep();
    let sd = delta.sqrt();
    let r = refinement;
    let hf = delta / r as f64;
    let mut out = Vec::with_capacity(cfg.steps);
    for n in 0..cfg.steps {
        path.seek_step(n as u64);
        bridge.seek_step(n as u64);
        let mut b = 0.0;
        let mut integral = 0.0;
        for _ in 0..k {
            let end = b + sd * path.next_normal();
            let mut x = b;
            for j in 0..r {
                let left = r - j;
                let next = if left == 1 {
                    end
                } else {
                    let lf = left as f64;
                    x + (end - x) / lf + (hf * (lf - 1.0) / lf).sqrt() * bridge.next_normal()
                };
                integral += 0.5 * hf * (x + next);
                x = next;
            }
            b = end;
        }
        out.push(tau * b - integral);
    }
    Ok(out)
}

/// Increment sets at `τ_f, 2τ_f, …, 2^{levels−1}τ_f`, finest first, all
/// functionals of one path. The finest level equals
/// [`sample_increments`]`(base)` bitwise.
pub fn sample_coupled_ladder(base: &NoiseConfig, levels: usize) -> Result<Vec<IncrementSet>> {
    base.validate()?;
    if levels == 0 {
        return Err(invalid("a ladder needs at least one level"));
    }
    let factor = 1u64 << (levels - 1);
    if !base.step.is_dyadic() || base.step.denominator() % factor != 0 {
        return Err(invalid(format!(
            "step {} cannot be coarsened dyadically {} times",
            base.step,
            levels - 1
        )));
    }
    if base.steps as u64 % factor != 0 {
        return Err(invalid(format!(
            "{} steps do not divide into coarse steps of {factor} fine steps",
            base.steps
        )));
    }
    let mut src = base.path_source();
    let per_step = match base.sampler {
        Sampler::Subgrid => subgrid_level_sums(base, levels, &mut src),
        Sampler::Exact => exact::ladder_level_sums(base, levels, &mut src)?,
    };
    Ok(aggregate_ladder(base, levels, &per_step))
}

/// Per fine step: `ΔW̄` and, for each level `j`, the sum of `B` over the
/// points of that fine step lying on level `j`'s subgrid (stride `8ʲ`).
pub(crate) struct FineStep {
    pub bar: f64,
    pub sums: Vec<f64>,
}

fn subgrid_level_sums(base: &NoiseConfig, levels: usize, src: &mut dyn NormalSource) -> Vec<FineStep> {
    let k = base.step.subcount();
    let sd = base.step.substep().sqrt();
    let masks: Vec<u64> = (0..levels).map(|j| (1u64 << (3 * j)) - 1).collect();
    let mut out = Vec::with_capacity(base.steps);
    for n in 0..base.steps {
        src.seek_step(n as u64);
        let offset = n as u64 * k;
        let mut b = 0.0;
        let mut sums = vec![0.0; levels];
        for l in 0..k {
            let p = offset + l;
            sums[0] += b;
            for j in 1..levels {
                if p & masks[j] == 0 {
                    sums[j] += b;
                } else {
                    break;
                }
            }
            b += sd * src.next_normal();
        }
        out.push(FineStep { bar: b, sums });
    }
    out
}

/// Level `j` sums over fine steps: each fine step contributes its own local
/// sum plus (points on level `j` in it) × (its left value − coarse left value).
fn aggregate_ladder(base: &NoiseConfig, levels: usize, fine: &[FineStep]) -> Vec<IncrementSet> {
    let k = base.step.subcount();
    let mut sets = Vec::with_capacity(levels);
    for j in 0..levels {
        let r = 1usize << j;
        let stride = 1u64 << (3 * j);
        let step = base.step.coarsen(r as u64).expect("validated dyadic ladder");
        let mut bar = Vec::with_capacity(base.steps / r);
        let mut sums = Vec::with_capacity(base.steps / r);
        for chunk in fine.chunks(r) {
            let mut offset = 0.0;
            let (mut b, mut s) = (0.0, 0.0);
            for (i, f) in chunk.iter().enumerate() {
                let first = (i as u64 * k).div_ceil(stride) * stride;
                let end = (i as u64 + 1) * k;
                let count = if first < end { (end - first).div_ceil(stride) } else { 0 };
                s += f.sums[j] + count as f64 * offset;
                offset += f.bar;
                b += f.bar;
            }
            bar.push(b);
            sums.push(s);
        }
        if j == 0 {
            // Keep the finest level identical to the single-level sampler.
            let bar0: Vec<f64> = fine.iter().map(|f| f.bar).collect();
            let sum0: Vec<f64> = fine.iter().map(|f| f.sums[0]).collect();
            sets.push(IncrementSet::from_parts(step, bar0, &sum0));
        } else {
            sets.push(IncrementSet::from_parts(step, bar, &sums));
        }
    }
    sets
}
