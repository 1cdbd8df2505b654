//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sewave::ensemble::{InitialChoice, MmsAxis, StudyConfig, StudyKind};
use sewave::model::CoefficientChoice;
use sewave::noise::{Sampler, StepSize};
use sewave::stepper::{DriftSolve, FirstStep};

use crate::CliError;

/// One configuration key: name, value syntax, description.
pub struct Key {
    pub name: &'static str,
    pub syntax: &'static str,
    pub help: &'static str,
}

pub const SCHEMA: &[Key] = &[
    Key { name: "t_final", syntax: "REAL", help: "final time T (default 1; 0.1 for converge-space)" },
    Key { name: "tau_ladder", syntax: "LADDER", help: "time-step ladder, e.g. 1/4:1/32 or 1/8,1/16 (default 1/4:1/32; 1/8:1/64 for mms)" },
    Key { name: "h_ladder", syntax: "LADDER", help: "mesh-size ladder h = 1/nx, e.g. 1/4:1/32 (default 1/4:1/32)" },
    Key { name: "nx", syntax: "INT", help: "cells per side when the mesh is fixed (default 32; 128 for mms, 16 for single-run)" },
    Key { name: "tau", syntax: "STEP", help: "time step when it is fixed, dyadic (default 1/1024; 1/64 for single-run)" },
    Key { name: "lambda", syntax: "REAL", help: "Lamé parameter λ ≥ 0 (default 1)" },
    Key { name: "mu", syntax: "REAL", help: "Lamé parameter μ > 0 (default 1)" },
    Key { name: "coefficients", syntax: "linear|trig|zero", help: "drift/diffusion package (default trig; linear for converge-space)" },
    Key { name: "initial", syntax: "default|at-rest|zero", help: "initial data (default: u0 = s(1,-1), v0 = s(1,1))" },
    Key { name: "samples", syntax: "INT", help: "Monte Carlo samples M (default 200; 100 for converge-space)" },
    Key { name: "seed", syntax: "INT", help: "base seed (default 0)" },
    Key { name: "temporal_ref_factor", syntax: "INT", help: "reference step = finest step / this, power of two (default 4)" },
    Key { name: "spatial_ref_levels", syntax: "INT", help: "reference mesh = finest mesh refined this many times (default 2)" },
    Key { name: "sampler", syntax: "subgrid|exact", help: "increment sampler (default subgrid; exact for converge-space)" },
    Key { name: "zero_noise", syntax: "BOOL", help: "force all increments to zero (default false)" },
    Key { name: "first_step", syntax: "taylor|reversed", help: "sign of the tau^2/2 term of the first step (default taylor)" },
    Key { name: "drift_solve", syntax: "auto|picard", help: "direct solve for linear drifts or always Picard (default auto)" },
    Key { name: "picard_tolerance", syntax: "REAL", help: "Picard relative increment tolerance (default 1e-10)" },
    Key { name: "picard_max_iterations", syntax: "INT", help: "Picard iteration cap (default 50)" },
    Key { name: "mms_axis", syntax: "time|space", help: "ladder walked by the mms command (default time)" },
    Key { name: "draws", syntax: "INT", help: "increment draws per level for noise-stats (default 100000)" },
    Key { name: "tilde_refinement", syntax: "INT", help: "bridge refinement of the integrated-increment oracle, >= 4 (default 4)" },
    Key { name: "max_failure_fraction", syntax: "REAL", help: "abort when more samples than this fraction fail (default 0.05)" },
    Key { name: "checkpoint_every", syntax: "INT", help: "single-run keeps every k-th state (default 1)" },
];

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// Parses `1/64`, `0.015625` or `2^-6` into a dyadic step.
pub fn parse_step(key: &str, s: &str) -> Result<StepSize, CliError> {
    let s = s.trim();
    let denom = if let Some(d) = s.strip_prefix("1/") {
        d.trim().parse::<u64>().map_err(|_| bad(key, s, "expected 1/N"))?
    } else if let Some(e) = s.strip_prefix("2^-") {
        let e: u32 = e.trim().parse().map_err(|_| bad(key, s, "expected 2^-k"))?;
        if e > 16 {
            return Err(bad(key, s, "step below 2^-16"));
        }
        1u64 << e
    } else {
        let t: f64 = s.parse().map_err(|_| bad(key, s, "expected a step such as 1/64"))?;
        let d = (1.0 / t).round();
        if !(t > 0.0) || (1.0 / t - d).abs() > 1e-9 * d {
            return Err(bad(key, s, "1/tau must be an integer; write dyadic steps as 1/2^k"));
        }
        d as u64
    };
    let step = StepSize::from_denominator(denom).map_err(|e| CliError::Config(format!("{key}: {e}")))?;
    if !step.is_dyadic() {
        return Err(CliError::Config(format!(
            "{key}: tau = {s} is not dyadic; coupled Brownian paths need nested grids, so tau must be 1/2^k (nearest: 1/{})",
            nearest_power_of_two(denom)
        )));
    }
    Ok(step)
}

fn nearest_power_of_two(d: u64) -> u64 {
    let lo = 1u64 << (63 - d.leading_zeros());
    if d - lo <= 2 * lo - d { lo } else { 2 * lo }
}

/// `A:B` expands by factors of two from `A` down to `B`; `A,B,...` is taken
/// verbatim.
pub fn parse_ladder(key: &str, s: &str) -> Result<Vec<StepSize>, CliError> {
    let steps: Vec<StepSize> = if let Some((a, b)) = s.split_once(':') {
        let (a, b) = (parse_step(key, a)?, parse_step(key, b)?);
        if b.denominator() < a.denominator() {
            return Err(bad(key, s, "ladder must run from coarse to fine"));
        }
        let mut out = vec![a];
        while out.last().expect("non-empty").denominator() < b.denominator() {
            out.push(out.last().expect("non-empty").refine(2).map_err(|e| CliError::Config(format!("{key}: {e}")))?);
        }
        out
    } else {
        s.split(',').map(|x| parse_step(key, x)).collect::<Result<_, _>>()?
    };
    Ok(steps)
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = '{value}': {why}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| bad(key, v, "not a valid number"))
}

fn word<T: std::str::FromStr<Err = sewave::Error>>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|e: sewave::Error| CliError::Config(format!("{key}: {e}")))
}

fn boolean(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn first_step(key: &str, v: &str) -> Result<FirstStep, CliError> {
    match v.trim() {
        "taylor" => Ok(FirstStep::Taylor),
        "reversed" => Ok(FirstStep::Reversed),
        _ => Err(bad(key, v, "expected taylor or reversed")),
    }
}

fn drift_solve(key: &str, v: &str) -> Result<DriftSolve, CliError> {
    match v.trim() {
        "auto" => Ok(DriftSolve::Auto),
        "picard" => Ok(DriftSolve::Picard),
        _ => Err(bad(key, v, "expected auto or picard")),
    }
}

/// Applies one `key = value` pair.
pub fn apply(cfg: &mut StudyConfig, key: &str, v: &str) -> Result<(), CliError> {
    match key {
        "t_final" => cfg.t_final = num(key, v)?,
        "tau_ladder" => cfg.tau_ladder = parse_ladder(key, v)?,
        "h_ladder" => cfg.h_ladder = parse_ladder(key, v)?.iter().map(|s| s.denominator() as usize).collect(),
        "nx" => cfg.nx = num(key, v)?,
        "tau" => cfg.tau = parse_step(key, v)?,
        "lambda" => cfg.lambda = num(key, v)?,
        "mu" => cfg.mu = num(key, v)?,
        "coefficients" => cfg.coefficients = word::<CoefficientChoice>(key, v)?,
        "initial" => cfg.initial = word::<InitialChoice>(key, v)?,
        "samples" => cfg.samples = num(key, v)?,
        "seed" => cfg.seed = num(key, v)?,
        "temporal_ref_factor" => cfg.temporal_ref_factor = num(key, v)?,
        "spatial_ref_levels" => cfg.spatial_ref_levels = num(key, v)?,
        "sampler" => cfg.sampler = word::<Sampler>(key, v)?,
        "zero_noise" => cfg.zero_noise = boolean(key, v)?,
        "first_step" => cfg.first_step = first_step(key, v)?,
        "drift_solve" => cfg.drift_solve = drift_solve(key, v)?,
        "picard_tolerance" => cfg.picard_tolerance = num(key, v)?,
        "picard_max_iterations" => cfg.picard_max_iterations = num(key, v)?,
        "mms_axis" => cfg.mms_axis = word::<MmsAxis>(key, v)?,
        "draws" => cfg.draws = num(key, v)?,
        "tilde_refinement" => cfg.tilde_refinement = num(key, v)?,
        "max_failure_fraction" => cfg.max_failure_fraction = num(key, v)?,
        "checkpoint_every" => cfg.checkpoint_every = num(key, v)?,
        _ => return Err(CliError::Config(format!("unknown configuration key '{key}'"))),
    }
    Ok(())
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_text(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Defaults for `kind`, then the file entries, then the overrides.
pub fn resolve(
    kind: StudyKind,
    file: &BTreeMap<String, String>,
    overrides: &[(String, String)],
) -> Result<StudyConfig, CliError> {
    let mut cfg = StudyConfig::defaults(kind);
    for (k, v) in file {
        apply(&mut cfg, k, v)?;
    }
    for (k, v) in overrides {
        apply(&mut cfg, k, v)?;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn ladder_text(steps: &[StepSize]) -> String {
    steps.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

/// Every key of the resolved configuration in the file syntax.
pub fn render(cfg: &StudyConfig) -> String {
    let mut s = String::new();
    let h: Vec<String> = cfg.h_ladder.iter().map(|n| format!("1/{n}")).collect();
    let lines = [
        ("t_final", format!("{:?}", cfg.t_final)),
        ("tau_ladder", ladder_text(&cfg.tau_ladder)),
        ("h_ladder", h.join(",")),
        ("nx", cfg.nx.to_string()),
        ("tau", cfg.tau.to_string()),
        ("lambda", format!("{:?}", cfg.lambda)),
        ("mu", format!("{:?}", cfg.mu)),
        ("coefficients", cfg.coefficients.to_string()),
        ("initial", cfg.initial.to_string()),
        ("samples", cfg.samples.to_string()),
        ("seed", cfg.seed.to_string()),
        ("temporal_ref_factor", cfg.temporal_ref_factor.to_string()),
        ("spatial_ref_levels", cfg.spatial_ref_levels.to_string()),
        ("sampler", cfg.sampler.to_string()),
        ("zero_noise", cfg.zero_noise.to_string()),
        ("first_step", match cfg.first_step {
            FirstStep::Taylor => "taylor".into(),
            FirstStep::Reversed => "reversed".into(),
        }),
        ("drift_solve", match cfg.drift_solve {
            DriftSolve::Auto => "auto".into(),
            DriftSolve::Picard => "picard".into(),
        }),
        ("picard_tolerance", format!("{:e}", cfg.picard_tolerance)),
        ("picard_max_iterations", cfg.picard_max_iterations.to_string()),
        ("mms_axis", cfg.mms_axis.to_string()),
        ("draws", cfg.draws.to_string()),
        ("tilde_refinement", cfg.tilde_refinement.to_string()),
        ("max_failure_fraction", format!("{:?}", cfg.max_failure_fraction)),
        ("checkpoint_every", cfg.checkpoint_every.to_string()),
    ];
    debug_assert_eq!(lines.len(), SCHEMA.len());
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}
