use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::fem::check_moduli;
use crate::model::{at_rest_initial_data, default_initial_data, zero_initial_data, CoefficientChoice, InitialData};
use crate::noise::{Sampler, StepSize};
use crate::stepper::{DriftSolve, FirstStep, SchemeSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Temporal,
    Spatial,
    Mms,
    NoiseStats,
    SingleRun,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::Temporal => "temporal",
            StudyKind::Spatial => "spatial",
            StudyKind::Mms => "mms",
            StudyKind::NoiseStats => "noise-stats",
            StudyKind::SingleRun => "single-run",
        })
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(Self::Temporal),
            "spatial" => Ok(Self::Spatial),
            "mms" => Ok(Self::Mms),
            "noise-stats" => Ok(Self::NoiseStats),
            "single-run" => Ok(Self::SingleRun),
            _ => Err(invalid(format!("unknown study kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialChoice {
    /// `u0 = s·(1, −1)`, `v0 = s·(1, 1)`.
    Default,
    /// `u0 = 0`, `v0 = s·(1, 1)`, compatible to second order.
    AtRest,
    Zero,
}

impl InitialChoice {
    pub fn build(self) -> InitialData {
        match self {
            InitialChoice::Default => default_initial_data(),
            InitialChoice::AtRest => at_rest_initial_data(),
            InitialChoice::Zero => zero_initial_data(),
        }
    }
}

impl fmt::Display for InitialChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialChoice::Default => "default",
            InitialChoice::AtRest => "at-rest",
            InitialChoice::Zero => "zero",
        })
    }
}

impl FromStr for InitialChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::Default),
            "at-rest" => Ok(Self::AtRest),
            "zero" => Ok(Self::Zero),
            _ => Err(invalid(format!("unknown initial data '{s}' (expected default, at-rest or zero)"))),
        }
    }
}

/// Which ladder the manufactured-solution study walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsAxis {
    Time,
    Space,
}

impl fmt::Display for MmsAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmsAxis::Time => "time",
            MmsAxis::Space => "space",
        })
    }
}

impl FromStr for MmsAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Self::Time),
            "space" => Ok(Self::Space),
            _ => Err(invalid(format!("unknown mms axis '{s}' (expected time or space)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub t_final: f64,
    /// Step ladder, coarsest first, each step half the previous one.
    pub tau_ladder: Vec<StepSize>,
    /// Cells per side, coarsest first, each twice the previous one.
    pub h_ladder: Vec<usize>,
    /// Mesh of studies that do not vary it.
    pub nx: usize,
    /// Step of studies that do not vary it.
    pub tau: StepSize,
    pub lambda: f64,
    pub mu: f64,
    pub coefficients: CoefficientChoice,
    pub initial: InitialChoice,
    pub samples: usize,
    pub seed: u64,
    /// Reference step is the finest ladder step divided by this.
    pub temporal_ref_factor: u64,
    /// Reference mesh is the finest ladder mesh refined this many times.
    pub spatial_ref_levels: u32,
    pub sampler: Sampler,
    /// Forces all increments to zero.
    pub zero_noise: bool,
    pub first_step: FirstStep,
    pub drift_solve: DriftSolve,
    pub picard_tolerance: f64,
    pub picard_max_iterations: usize,
    pub mms_axis: MmsAxis,
    /// Increment draws per level of the noise statistics.
    pub draws: usize,
    /// Bridge refinement of the `ΔW̃` oracle.
    pub tilde_refinement: usize,
    /// A study aborts when more than this fraction of samples fail.
    pub max_failure_fraction: f64,
    /// Single runs keep every k-th state.
    pub checkpoint_every: usize,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

fn ladder(coarse: u64, fine: u64) -> Vec<StepSize> {
    let mut out = Vec::new();
    let mut d = coarse;
    while d <= fine {
        out.push(StepSize::from_denominator(d).expect("valid denominator"));
        d *= 2;
    }
    out
}

impl StudyConfig {
    /// Defaults: `λ = μ = 1`, seed 0; temporal studies on `builtin_trig` with
    /// `h = 1/32`, `τ ∈ {1/4 … 1/32}`, `T = 1`, `M = 200`; spatial studies on
    /// `builtin_linear` with `τ = 2⁻¹⁰`, `h ∈ {1/4 … 1/32}`, `T = 0.1`,
    /// `M = 100`; manufactured-solution runs on `h = 1/128` with
    /// `τ ∈ {1/8 … 1/64}`.
    pub fn defaults(kind: StudyKind) -> Self {
        let base = Self {
            kind,
            t_final: 1.0,
            tau_ladder: ladder(4, 32),
            h_ladder: vec![4, 8, 16, 32],
            nx: 32,
            tau: StepSize::from_denominator(1024).expect("valid"),
            lambda: 1.0,
            mu: 1.0,
            coefficients: CoefficientChoice::Trig,
            initial: InitialChoice::Default,
            samples: 200,
            seed: 0,
            temporal_ref_factor: 4,
            spatial_ref_levels: 2,
            sampler: Sampler::Subgrid,
            zero_noise: false,
            first_step: FirstStep::Taylor,
            drift_solve: DriftSolve::Auto,
            picard_tolerance: 1e-10,
            picard_max_iterations: 50,
            mms_axis: MmsAxis::Time,
            draws: 100_000,
            tilde_refinement: 4,
            max_failure_fraction: 0.05,
            checkpoint_every: 1,
            threads: 0,
        };
        match kind {
            StudyKind::Temporal => base,
            StudyKind::Spatial => Self {
                t_final: 0.1,
                coefficients: CoefficientChoice::Linear,
                samples: 100,
                sampler: Sampler::Exact,
                ..base
            },
            StudyKind::Mms => Self {
                nx: 128,
                tau_ladder: ladder(8, 64),
                samples: 1,
                coefficients: CoefficientChoice::Zero,
                ..base
            },
            StudyKind::NoiseStats => base,
            StudyKind::SingleRun => Self {
                nx: 16,
                tau: StepSize::from_denominator(64).expect("valid"),
                samples: 1,
                ..base
            },
        }
    }

    pub fn scheme_settings(&self) -> SchemeSettings {
        SchemeSettings {
            picard_tolerance: self.picard_tolerance,
            picard_max_iterations: self.picard_max_iterations,
            first_step: self.first_step,
            drift_solve: self.drift_solve,
            ..SchemeSettings::default()
        }
    }

    /// Steps needed to reach `T` with `step`; `T/τ` must be an integer.
    pub fn steps_exact(&self, step: StepSize) -> Result<usize> {
        let n = self.t_final * step.denominator() as f64;
        let r = n.round();
        if r < 1.0 || (n - r).abs() > 1e-9 * r.max(1.0) {
            return Err(invalid(format!("t_final = {} is not a multiple of τ = {step}", self.t_final)));
        }
        Ok(r as usize)
    }

    /// `⌊T/τ⌋`, at least one.
    pub fn steps_floor(&self, step: StepSize) -> Result<usize> {
        let n = (self.t_final * step.denominator() as f64 * (1.0 + 1e-12)).floor();
        if n < 1.0 {
            return Err(invalid(format!("t_final = {} is shorter than τ = {step}", self.t_final)));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        check_moduli(self.lambda, self.mu)?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.samples == 0 {
            return Err(invalid("samples must be at least 1"));
        }
        if self.nx == 0 {
            return Err(invalid("nx must be positive"));
        }
        if self.tau_ladder.is_empty() || self.h_ladder.is_empty() {
            return Err(invalid("ladders must not be empty"));
        }
        for w in self.tau_ladder.windows(2) {
            if w[1].denominator() != 2 * w[0].denominator() {
                return Err(invalid(format!("tau ladder must halve at every level ({} then {})", w[0], w[1])));
            }
        }
        if self.tau_ladder.iter().any(|s| !s.is_dyadic()) {
            return Err(invalid("tau ladder steps must be dyadic (1/2^k): coupled paths need nested grids"));
        }
        for w in self.h_ladder.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(invalid(format!("h ladder must halve at every level (nx {} then {})", w[0], w[1])));
            }
        }
        if self.h_ladder[0] == 0 {
            return Err(invalid("h ladder needs positive cell counts"));
        }
        if !self.temporal_ref_factor.is_power_of_two() {
            return Err(invalid("temporal_ref_factor must be a power of two"));
        }
        if !(0.0..1.0).contains(&self.max_failure_fraction) {
            return Err(invalid("max_failure_fraction must lie in [0, 1)"));
        }
        if self.draws == 0 {
            return Err(invalid("draws must be positive"));
        }
        if self.tilde_refinement < 4 {
            return Err(invalid("tilde_refinement must be at least 4"));
        }
        if self.checkpoint_every == 0 {
            return Err(invalid("checkpoint_every must be positive"));
        }
        if !(self.picard_tolerance > 0.0) || self.picard_max_iterations == 0 {
            return Err(invalid("Picard tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}
