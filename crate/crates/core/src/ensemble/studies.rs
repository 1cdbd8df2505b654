use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{MmsAxis, StudyConfig};
use super::{collect_samples, error_norms, squared_norms, ErrorSquares, RateTable};
use crate::error::{invalid, Result};
use crate::fem::{h1_semi_error_against, l2_error_against, Discretization, FeFunction, Prolongation, WithJacobian};
use crate::mesh::{Mesh, Point, Rect};
use crate::model::{Coefficients, InitialData, Manufactured};
use crate::noise::{sample_coupled_ladder, sample_increments, IncrementSet, NoiseConfig, StepSize};
use crate::stepper::{run_trajectory, EnergyLevel, InitialPair, Record, SchemeState, SchemeSystem, Trajectory};

/// Sample mean of `𝒥(uⁿ, vⁿ)`, `n = 1..=N`, on one ladder level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub step: StepSize,
    pub mean_j: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub table: RateTable,
    /// Temporal studies only.
    pub energy: Vec<EnergyTrace>,
    /// Largest Picard count seen on each level.
    pub max_picard: Vec<usize>,
    /// Human-readable description of the reference solution.
    pub reference: String,
    /// Time actually reached, `N·τ`.
    pub t_final: f64,
}

fn run_samples<T: Send>(cfg: &StudyConfig, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<Result<T>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..cfg.samples as u64).into_par_iter().map(&f).collect()))
}

fn build_system(disc: &Arc<Discretization>, coeffs: &Arc<dyn Coefficients>, step: StepSize, cfg: &StudyConfig) -> Result<SchemeSystem> {
    SchemeSystem::new(disc.clone(), coeffs.clone(), step, cfg.scheme_settings())
}

fn noise_for(cfg: &StudyConfig, step: StepSize, steps: usize, sample: u64) -> Result<IncrementSet> {
    if cfg.zero_noise {
        Ok(IncrementSet::zeros(step, steps))
    } else {
        sample_increments(&NoiseConfig::with_steps(steps, step, cfg.seed, sample).with_sampler(cfg.sampler))
    }
}

/// Advances several systems sharing one set of increments and calls `visit`
/// with their states after every step, `n = 1..=N`.
pub fn lockstep(
    systems: &[&SchemeSystem],
    inits: &[InitialPair],
    increments: &IncrementSet,
    mut visit: impl FnMut(&[SchemeState]) -> Result<()>,
) -> Result<()> {
    if systems.len() != inits.len() {
        return Err(invalid("one initial pair per system is required"));
    }
    let mut states = Vec::with_capacity(systems.len());
    for (s, init) in systems.iter().zip(inits) {
        if s.step_size() != increments.step {
            return Err(invalid("all systems must use the increments' step"));
        }
        states.push(s.init_states(init, increments.bar[0], increments.hat[0])?.0);
    }
    visit(&states)?;
    for n in 1..increments.steps() {
        for (s, state) in systems.iter().zip(states.iter_mut()) {
            *state = s.step(state, increments.bar[n], increments.hat[n])?.0;
        }
        visit(&states)?;
    }
    Ok(())
}

fn mean_traces(per_sample: &[Vec<Vec<f64>>], steps: &[StepSize]) -> Vec<EnergyTrace> {
    steps
        .iter()
        .enumerate()
        .map(|(l, &step)| {
            let len = per_sample[0][l].len();
            let mean_j = (0..len)
                .map(|n| per_sample.iter().map(|s| s[l][n]).sum::<f64>() / per_sample.len() as f64)
                .collect();
            EnergyTrace { step, mean_j }
        })
        .collect()
}

fn tau_levels(steps: &[StepSize]) -> Vec<(f64, String)> {
    steps.iter().map(|s| (s.tau(), s.to_string())).collect()
}

fn h_levels(nx: &[usize]) -> Vec<(f64, String)> {
    nx.iter().map(|&n| (1.0 / n as f64, format!("1/{n}"))).collect()
}

struct TemporalSample {
    errors: Vec<ErrorSquares>,
    energy: Vec<Vec<f64>>,
    picard: Vec<usize>,
}

/// Errors of each ladder step against a per-sample reference at
/// `τ_min / temporal_ref_factor` on the same mesh and the same path.
pub fn temporal_convergence_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let finest = *cfg.tau_ladder.last().expect("validated non-empty");
    let reference = finest.refine(cfg.temporal_ref_factor)?;
    let ref_steps = cfg.steps_exact(reference)?;
    for &s in &cfg.tau_ladder {
        cfg.steps_exact(s)?;
    }
    let levels = (reference.denominator() / cfg.tau_ladder[0].denominator()).trailing_zeros() as usize + 1;

    let disc = Arc::new(Discretization::from_mesh(Mesh::square(cfg.nx)?, cfg.lambda, cfg.mu)?);
    let coeffs = cfg.coefficients.build();
    let data = cfg.initial.build();
    let ref_system = build_system(&disc, &coeffs, reference, cfg)?;
    let systems = cfg
        .tau_ladder
        .iter()
        .map(|&s| build_system(&disc, &coeffs, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let init = ref_system.initial_pair(&data)?;
    let every = cfg.temporal_ref_factor as usize;

    let results = run_samples(cfg, |sample| {
        let sets: Vec<IncrementSet> = if cfg.zero_noise {
            (0..levels)
                .map(|j| {
                    let step = reference.coarsen(1 << j)?;
                    Ok(IncrementSet::zeros(step, ref_steps >> j))
                })
                .collect::<Result<_>>()?
        } else {
            let base = NoiseConfig::with_steps(ref_steps, reference, cfg.seed, sample).with_sampler(cfg.sampler);
            sample_coupled_ladder(&base, levels)?
        };
        let level_of = |s: StepSize| (reference.denominator() / s.denominator()).trailing_zeros() as usize;
        let r = run_trajectory(&ref_system, &init, &sets[0], &Record::Every(every), None)?;
        let mut out = TemporalSample {
            errors: Vec::new(),
            energy: Vec::new(),
            picard: Vec::new(),
        };
        for sys in &systems {
            let t = run_trajectory(sys, &init, &sets[level_of(sys.step_size())], &Record::Every(1), None)?;
            out.errors.push(error_norms(&t.checkpoints, &r.checkpoints, &disc)?);
            out.energy.push(t.reports.iter().map(|x| x.energies.j).collect());
            out.picard.push(t.reports.iter().map(|x| x.picard_iterations).max().unwrap_or(0));
        }
        Ok(out)
    })?;
    let (ok, failed) = collect_samples(results, cfg.max_failure_fraction)?;
    let errors: Vec<Vec<ErrorSquares>> = ok.iter().map(|s| s.errors.clone()).collect();
    let energy: Vec<Vec<Vec<f64>>> = ok.iter().map(|s| s.energy.clone()).collect();
    let max_picard = (0..systems.len())
        .map(|l| ok.iter().map(|s| s.picard[l]).max().unwrap_or(0))
        .collect();
    Ok(StudyReport {
        table: RateTable::from_samples(&tau_levels(&cfg.tau_ladder), &errors, failed)?,
        energy: mean_traces(&energy, &cfg.tau_ladder),
        max_picard,
        reference: format!("tau = {reference} on the same mesh, same Brownian path"),
        t_final: cfg.t_final,
    })
}

/// Errors of each ladder mesh against a per-sample reference on the finest
/// mesh refined `spatial_ref_levels` times, all driven by the same increments
/// at the fixed step `cfg.tau`. The horizon is `⌊T/τ⌋·τ`.
pub fn spatial_convergence_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let steps = cfg.steps_floor(cfg.tau)?;
    let finest = *cfg.h_ladder.last().expect("validated non-empty");
    let ref_nx = finest << cfg.spatial_ref_levels;
    let coeffs = cfg.coefficients.build();
    let data = cfg.initial.build();

    let discs = cfg
        .h_ladder
        .iter()
        .chain(std::iter::once(&ref_nx))
        .map(|&n| Ok(Arc::new(Discretization::from_mesh(Mesh::square(n)?, cfg.lambda, cfg.mu)?)))
        .collect::<Result<Vec<_>>>()?;
    let target = discs.last().expect("reference").clone();
    let systems = discs
        .iter()
        .map(|d| build_system(d, &coeffs, cfg.tau, cfg))
        .collect::<Result<Vec<_>>>()?;
    let inits = systems.iter().map(|s| s.initial_pair(&data)).collect::<Result<Vec<_>>>()?;
    let transfers = discs[..discs.len() - 1]
        .iter()
        .map(|d| Prolongation::new(d.dofmap(), target.dofmap()))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SchemeSystem> = systems.iter().collect();
    let levels = cfg.h_ladder.len();

    let results = run_samples(cfg, |sample| {
        let inc = noise_for(cfg, cfg.tau, steps, sample)?;
        let mut max = vec![[0.0f64; 3]; levels];
        lockstep(&refs, &inits, &inc, |states| {
            let r = &states[levels];
            for (l, p) in transfers.iter().enumerate() {
                let u = p.apply_raw(states[l].u_curr.coeffs());
                let v = p.apply_raw(states[l].v_curr.coeffs());
                let du: Vec<f64> = u.iter().zip(r.u_curr.coeffs()).map(|(a, b)| a - b).collect();
                let dv: Vec<f64> = v.iter().zip(r.v_curr.coeffs()).map(|(a, b)| a - b).collect();
                let e = squared_norms(&target, &du, &dv);
                for k in 0..3 {
                    max[l][k] = max[l][k].max(e[k]);
                }
            }
            Ok(())
        })?;
        Ok(max)
    })?;
    let (ok, failed) = collect_samples(results, cfg.max_failure_fraction)?;
    Ok(StudyReport {
        table: RateTable::from_samples(&h_levels(&cfg.h_ladder), &ok, failed)?,
        energy: Vec::new(),
        max_picard: Vec::new(),
        reference: format!("h = 1/{ref_nx}, same increments"),
        t_final: steps as f64 * cfg.tau.tau(),
    })
}

/// Squared errors of one state against the manufactured solution at `t`.
fn mms_errors(m: &Manufactured, t: f64, u: &FeFunction, v: &FeFunction) -> ErrorSquares {
    let exact = WithJacobian {
        value: move |p: Point| m.displacement(t, p),
        jacobian: move |p: Point| m.displacement_jacobian(t, p),
    };
    let vel = move |p: Point| m.velocity(t, p);
    [
        l2_error_against(u, &exact).powi(2),
        h1_semi_error_against(u, &exact).powi(2),
        l2_error_against(v, &vel).powi(2),
    ]
}

fn mms_run(m: &Manufactured, sys: &SchemeSystem, data: &InitialData, steps: usize) -> Result<ErrorSquares> {
    let init = sys.initial_pair(data)?;
    let inc = IncrementSet::zeros(sys.step_size(), steps);
    let t = run_trajectory(sys, &init, &inc, &Record::Every(1), None)?;
    let mut max = [0.0f64; 3];
    for cp in t.checkpoints.iter().filter(|c| c.n >= 1) {
        let e = mms_errors(m, cp.t, &cp.u, &cp.v);
        for k in 0..3 {
            max[k] = max[k].max(e[k]);
        }
    }
    Ok(max)
}

/// Deterministic errors against `u* = cos(πt)·s(x, y)·(1, −1)` along the
/// step ladder (`MmsAxis::Time`, mesh `nx`) or the mesh ladder
/// (`MmsAxis::Space`, step `tau`).
pub fn mms_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let m = Manufactured::new(Rect::symmetric_unit(), cfg.lambda, cfg.mu);
    let coeffs = m.coefficients();
    let data = m.initial_data();
    let (levels, errors, t_final, reference) = match cfg.mms_axis {
        MmsAxis::Time => {
            let disc = Arc::new(Discretization::from_mesh(Mesh::square(cfg.nx)?, cfg.lambda, cfg.mu)?);
            let mut errors = Vec::new();
            for &s in &cfg.tau_ladder {
                let sys = build_system(&disc, &coeffs, s, cfg)?;
                errors.push(mms_run(&m, &sys, &data, cfg.steps_exact(s)?)?);
            }
            (tau_levels(&cfg.tau_ladder), errors, cfg.t_final, format!("exact solution, h = 1/{}", cfg.nx))
        }
        MmsAxis::Space => {
            let steps = cfg.steps_floor(cfg.tau)?;
            let mut errors = Vec::new();
            for &n in &cfg.h_ladder {
                let disc = Arc::new(Discretization::from_mesh(Mesh::square(n)?, cfg.lambda, cfg.mu)?);
                let sys = build_system(&disc, &coeffs, cfg.tau, cfg)?;
                errors.push(mms_run(&m, &sys, &data, steps)?);
            }
            let t = steps as f64 * cfg.tau.tau();
            (h_levels(&cfg.h_ladder), errors, t, format!("exact solution, tau = {}", cfg.tau))
        }
    };
    Ok(StudyReport {
        table: RateTable::from_samples(&levels, &[errors], 0)?,
        energy: Vec::new(),
        max_picard: Vec::new(),
        reference,
        t_final,
    })
}

/// One trajectory on mesh `nx` with step `tau` and sample 0 of the seed,
/// keeping every `checkpoint_every`-th state and the final one. All four
/// energies are recorded.
pub fn single_run(cfg: &StudyConfig, diagnostics: Option<&mut dyn Write>) -> Result<Trajectory> {
    cfg.validate()?;
    let steps = cfg.steps_exact(cfg.tau)?;
    let disc = Arc::new(Discretization::from_mesh(Mesh::square(cfg.nx)?, cfg.lambda, cfg.mu)?);
    let settings = crate::stepper::SchemeSettings {
        energies: EnergyLevel::Full,
        ..cfg.scheme_settings()
    };
    let sys = SchemeSystem::new(disc, cfg.coefficients.build(), cfg.tau, settings)?;
    let init = sys.initial_pair(&cfg.initial.build())?;
    let inc = noise_for(cfg, cfg.tau, steps, 0)?;
    let mut keep: Vec<usize> = (0..=steps).step_by(cfg.checkpoint_every).collect();
    if keep.last() != Some(&steps) {
        keep.push(steps);
    }
    run_trajectory(&sys, &init, &inc, &Record::Steps(keep), diagnostics)
}
