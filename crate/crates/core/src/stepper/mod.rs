//! The two-field leapfrog-type scheme for the stochastic elastic wave
//! equation, one trajectory at a time.
//!
//! Each step solves, on boundary-free rows,
//!
//! ```text
//! K U = M uⁿ − M Ĝ + τ M vⁿ − (τ²/2) A uⁿ⁻¹ + τ² M F̂(U) + τ M Ḡ + τ M D̂
//! V   = (U − uⁿ + Ĝ) / τ
//! ```
//!
//! with `K = M + (τ²/2) A`, `Ĝ = Π G(uⁿ) ΔŴₙ`, `Ḡ = Π G(uⁿ) ΔW̄ₙ`,
//! `D̂ = Π [D_u G(uⁿ) vⁿ] ΔŴₙ` and `F̂(U) = ½(Π F(tₙ₊₁, U) + Π F(tₙ₋₁, uⁿ⁻¹))`,
//! where `Π` is nodal interpolation. The implicit drift is resolved by Picard
//! iteration, or by one solve with a modified matrix when `F` is linear.

mod energy;

use std::io::Write;
use std::sync::Arc;

pub use energy::{energy_j, energy_j_tilde, energy_leapfrog, energy_q, energy_q_tilde, Energies};

use crate::error::{invalid, Error, Result};
use crate::fem::{DofMap, Discretization, FeFunction, L2Source, RitzSource};
use crate::linalg::{prepare_spd, SolverHandle, TripletBuilder};
use crate::model::{Coefficients, InitialData, Vec2};
use crate::noise::{IncrementSet, StepSize};

/// Choice of the deterministic part of the special first step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstStep {
    /// `u¹ = u⁰ + τv⁰ + (τ²/2)(𝓛_h u⁰ + F(u⁰)) − Ĝ₀ + τḠ₀`, the Taylor step.
    #[default]
    Taylor,
    /// The same with the sign of the `τ²/2` term reversed.
    Reversed,
}

/// How the implicit drift is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftSolve {
    /// One solve with `K − (τ²/2) M B` when `F(u) = Bu` is linear, Picard otherwise.
    #[default]
    Auto,
    /// Always Picard.
    Picard,
}

/// Which energies each step records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyLevel {
    None,
    /// `𝒥` and `𝒬`.
    #[default]
    Basic,
    /// Also `𝒥̃` and `𝒬̃`, which need two extra mass solves.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSettings {
    pub picard_tolerance: f64,
    pub picard_max_iterations: usize,
    pub first_step: FirstStep,
    pub drift_solve: DriftSolve,
    pub energies: EnergyLevel,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        Self {
            picard_tolerance: 1e-10,
            picard_max_iterations: 50,
            first_step: FirstStep::Taylor,
            drift_solve: DriftSolve::Auto,
            energies: EnergyLevel::Basic,
        }
    }
}

/// `(uⁿ⁻¹, uⁿ, vⁿ)` and the running sum `ūⁿ = Σ_{m=1}^n uᵐ`.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub n: usize,
    pub u_prev: FeFunction,
    pub u_curr: FeFunction,
    pub v_curr: FeFunction,
    pub u_running_sum: FeFunction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Index of the state produced by this step.
    pub step: usize,
    pub picard_iterations: usize,
    pub picard_residual: f64,
    pub energies: Energies,
}

/// Discrete initial values `u⁰ = ℛ_h u₀` and `v⁰ = 𝒫_h v₀` (onto the
/// boundary-compliant subspace).
#[derive(Debug, Clone)]
pub struct InitialPair {
    pub u0: FeFunction,
    pub v0: FeFunction,
}

/// Everything fixed for one `(mesh, τ, λ, μ, coefficients)`: shared read-only
/// by all samples.
pub struct SchemeSystem {
    disc: Arc<Discretization>,
    coeffs: Arc<dyn Coefficients>,
    step: StepSize,
    settings: SchemeSettings,
    solver: SolverHandle,
    linear: Option<Vec2>,
}

impl std::fmt::Debug for SchemeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchemeSystem")
            .field("n_dofs", &self.disc.n_dofs())
            .field("step", &self.step)
            .field("coefficients", &self.coeffs.name())
            .field("settings", &self.settings)
            .finish()
    }
}

impl SchemeSystem {
    pub fn new(
        disc: Arc<Discretization>,
        coeffs: Arc<dyn Coefficients>,
        step: StepSize,
        settings: SchemeSettings,
    ) -> Result<Self> {
        if !(settings.picard_tolerance > 0.0) || settings.picard_max_iterations == 0 {
            return Err(invalid("Picard tolerance and iteration cap must be positive"));
        }
        let linear = match settings.drift_solve {
            DriftSolve::Auto => coeffs.linear_drift(),
            DriftSolve::Picard => None,
        };
        let tau = step.tau();
        let half = 0.5 * tau * tau;
        let b = linear.unwrap_or([0.0; 2]);
        let (m, a) = (disc.mass(), disc.stiffness());
        let mut t = TripletBuilder::with_capacity(disc.n_dofs(), m.nnz() + a.nnz());
        for i in 0..disc.n_dofs() {
            let scale = 1.0 - half * b[i % 2];
            for (j, v) in m.row(i) {
                t.add(i, j, scale * v);
            }
            for (j, v) in a.row(i) {
                t.add(i, j, half * v);
            }
        }
        let k = t.finalize_symmetric()?.eliminate(disc.dofmap().constrained_mask())?;
        let solver = prepare_spd(&k)?;
        Ok(Self {
            disc,
            coeffs,
            step,
            settings,
            solver,
            linear,
        })
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn coefficients(&self) -> &Arc<dyn Coefficients> {
        &self.coeffs
    }

    pub fn step_size(&self) -> StepSize {
        self.step
    }

    pub fn settings(&self) -> &SchemeSettings {
        &self.settings
    }

    /// True when the drift is resolved by a single modified solve.
    pub fn uses_linear_drift(&self) -> bool {
        self.linear.is_some()
    }

    fn dofmap(&self) -> &Arc<DofMap> {
        self.disc.dofmap()
    }

    pub fn initial_pair(&self, data: &InitialData) -> Result<InitialPair> {
        let u0 = self.disc.elasticity_project(RitzSource::Field(data.u0.as_ref()))?;
        let v0 = self.disc.l2_project_constrained(L2Source::Field(data.v0.as_ref()))?;
        Ok(InitialPair { u0, v0 })
    }

    /// Nodal values of `F(t, x, u(x))`.
    fn drift_nodal(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let verts = self.disc.mesh().vertices();
        let mut out = vec![0.0; u.len()];
        for (v, &x) in verts.iter().enumerate() {
            let f = self.coeffs.drift_at(t, x, [u[2 * v], u[2 * v + 1]]);
            out[2 * v] = f[0];
            out[2 * v + 1] = f[1];
        }
        out
    }

    fn diffusion_nodal(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for v in 0..u.len() / 2 {
            let g = self.coeffs.diffusion([u[2 * v], u[2 * v + 1]]);
            out[2 * v] = g[0];
            out[2 * v + 1] = g[1];
        }
        out
    }

    fn derivative_nodal(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for v in 0..u.len() / 2 {
            let d = self
                .coeffs
                .diffusion_derivative([u[2 * v], u[2 * v + 1]], [w[2 * v], w[2 * v + 1]]);
            out[2 * v] = d[0];
            out[2 * v + 1] = d[1];
        }
        out
    }

    fn time(&self, n: usize) -> f64 {
        n as f64 * self.step.tau()
    }

    /// Builds `(u⁰, u¹, v¹)` from the initial pair and the first increments.
    pub fn init_states(&self, init: &InitialPair, bar0: f64, hat0: f64) -> Result<(SchemeState, StepReport)> {
        let dm = self.dofmap();
        if !init.u0.dofmap().same_space(dm) || !init.v0.dofmap().same_space(dm) {
            return Err(invalid("initial data lives on a different mesh"));
        }
        let tau = self.step.tau();
        let u0 = init.u0.coeffs();
        let v0 = init.v0.coeffs();
        // w = 𝓛_h u⁰ + 𝒫_h F(t₀, u⁰) on the boundary-compliant subspace.
        let f0 = self.drift_nodal(self.time(0), u0);
        let mut rhs = self.disc.mass().mul_vec(&f0);
        self.disc.stiffness().mul_vec_add(-1.0, u0, &mut rhs);
        dm.zero_constrained(&mut rhs);
        let w = self.disc.mass_dir_solver()?.solve(&rhs)?;
        let sign = match self.settings.first_step {
            FirstStep::Taylor => 1.0,
            FirstStep::Reversed => -1.0,
        };
        let mut g = self.diffusion_nodal(u0);
        dm.zero_constrained(&mut g);
        let mut u1 = vec![0.0; u0.len()];
        for i in 0..u1.len() {
            u1[i] = u0[i] + tau * v0[i] + sign * 0.5 * tau * tau * w[i] - g[i] * hat0 + tau * g[i] * bar0;
        }
        dm.zero_constrained(&mut u1);
        let v1: Vec<f64> = (0..u1.len()).map(|i| (u1[i] - u0[i] + g[i] * hat0) / tau).collect();
        let state = SchemeState {
            n: 1,
            u_prev: init.u0.clone(),
            u_curr: self.disc.function(u1.clone())?,
            v_curr: self.disc.function(v1)?,
            u_running_sum: self.disc.function(u1)?,
        };
        check_finite(&state, 1, &[])?;
        let energies = self.energies(&state)?;
        Ok((
            state,
            StepReport {
                step: 1,
                picard_iterations: 0,
                picard_residual: 0.0,
                energies,
            },
        ))
    }

    /// Advances from step `n` to `n + 1` with the increments of step `n`.
    pub fn step(&self, state: &SchemeState, bar: f64, hat: f64) -> Result<(SchemeState, StepReport)> {
        let n = state.n;
        if n == 0 {
            return Err(invalid("the first step is taken by init_states"));
        }
        let dm = self.dofmap();
        let tau = self.step.tau();
        let half = 0.5 * tau * tau;
        let (m, a) = (self.disc.mass(), self.disc.stiffness());
        let un = state.u_curr.coeffs();
        let vn = state.v_curr.coeffs();
        let uprev = state.u_prev.coeffs();
        let len = un.len();

        let g = self.diffusion_nodal(un);
        let mut ghat: Vec<f64> = g.iter().map(|x| x * hat).collect();
        dm.zero_constrained(&mut ghat);
        let d = self.derivative_nodal(un, vn);
        let f_prev = self.drift_nodal(self.time(n - 1), uprev);

        // Everything except the drift at the new level.
        let mut combo = vec![0.0; len];
        for i in 0..len {
            combo[i] = un[i] - ghat[i] + tau * vn[i] + tau * bar * g[i] + tau * hat * d[i] + half * f_prev[i];
        }
        let mut base = m.mul_vec(&combo);
        a.mul_vec_add(-half, uprev, &mut base);

        let mut u = un.to_vec();
        let mut residuals = Vec::new();
        let mut rhs = vec![0.0; len];
        let mut next = vec![0.0; len];
        let iterate = self.linear.is_none() && self.coeffs.drift_depends_on_state();
        loop {
            rhs.copy_from_slice(&base);
            if self.linear.is_none() {
                let f_new = self.drift_nodal(self.time(n + 1), &u);
                m.mul_vec_add(half, &f_new, &mut rhs);
            }
            dm.zero_constrained(&mut rhs);
            self.solver.solve_into(&rhs, &mut next)?;
            let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
            let num = m.quad_form(&diff).max(0.0).sqrt();
            let den = m.quad_form(&next).max(0.0).sqrt();
            let r = if num == 0.0 { 0.0 } else { num / den };
            std::mem::swap(&mut u, &mut next);
            residuals.push(r);
            if !r.is_finite() {
                return Err(Error::StepFailure { step: n + 1, residuals });
            }
            if !iterate || r <= self.settings.picard_tolerance {
                break;
            }
            if residuals.len() >= self.settings.picard_max_iterations {
                return Err(Error::StepFailure { step: n + 1, residuals });
            }
        }
        dm.zero_constrained(&mut u);
        let v: Vec<f64> = (0..len).map(|i| (u[i] - un[i] + ghat[i]) / tau).collect();
        let sum: Vec<f64> = state.u_running_sum.coeffs().iter().zip(&u).map(|(s, x)| s + x).collect();
        let iterations = residuals.len();
        let residual = if iterate { *residuals.last().unwrap_or(&0.0) } else { 0.0 };
        let new = SchemeState {
            n: n + 1,
            u_prev: state.u_curr.clone(),
            u_curr: self.disc.function(u)?,
            v_curr: self.disc.function(v)?,
            u_running_sum: self.disc.function(sum)?,
        };
        check_finite(&new, n + 1, &residuals)?;
        let energies = self.energies(&new)?;
        Ok((
            new,
            StepReport {
                step: n + 1,
                picard_iterations: iterations,
                picard_residual: residual,
                energies,
            },
        ))
    }

    pub fn energies(&self, s: &SchemeState) -> Result<Energies> {
        let tau = self.step.tau();
        let d = &self.disc;
        Ok(match self.settings.energies {
            EnergyLevel::None => Energies::default(),
            EnergyLevel::Basic => Energies {
                j: energy_j(d, &s.u_curr, &s.v_curr),
                q: energy_q(d, &s.u_curr, &s.u_running_sum, tau),
                leapfrog: energy_leapfrog(d, &s.u_curr, &s.u_prev, &s.v_curr),
                j_tilde: None,
                q_tilde: None,
            },
            EnergyLevel::Full => Energies {
                j: energy_j(d, &s.u_curr, &s.v_curr),
                q: energy_q(d, &s.u_curr, &s.u_running_sum, tau),
                leapfrog: energy_leapfrog(d, &s.u_curr, &s.u_prev, &s.v_curr),
                j_tilde: Some(energy_j_tilde(d, &s.u_curr, &s.v_curr)?),
                q_tilde: Some(energy_q_tilde(d, &s.u_curr, &s.u_running_sum, tau)?),
            },
        })
    }
}

fn check_finite(s: &SchemeState, step: usize, residuals: &[f64]) -> Result<()> {
    let ok = s.u_curr.coeffs().iter().chain(s.v_curr.coeffs()).all(|x| x.is_finite());
    if ok {
        Ok(())
    } else {
        let mut residuals = residuals.to_vec();
        residuals.push(f64::NAN);
        Err(Error::StepFailure { step, residuals })
    }
}

/// Which states [`run_trajectory`] keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Nothing,
    Final,
    /// Every `k`-th state, starting with `n = 0`.
    Every(usize),
    Steps(Vec<usize>),
}

impl Record {
    fn wants(&self, n: usize, last: usize) -> bool {
        match self {
            Record::Nothing => false,
            Record::Final => n == last,
            Record::Every(k) => *k > 0 && n % k == 0,
            Record::Steps(v) => v.contains(&n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub n: usize,
    pub t: f64,
    pub u: FeFunction,
    pub v: FeFunction,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    /// One report per produced state, `n = 1..=N`.
    pub reports: Vec<StepReport>,
}

pub const DIAGNOSTIC_HEADER: &str = "step,picard_iterations,picard_residual,J,J_tilde";

pub fn write_diagnostic_line(out: &mut dyn Write, r: &StepReport) -> std::io::Result<()> {
    let jt = r.energies.j_tilde.map(|x| format!("{x:.10e}")).unwrap_or_default();
    writeln!(
        out,
        "{},{},{:.3e},{:.10e},{}",
        r.step, r.picard_iterations, r.picard_residual, r.energies.j, jt
    )
}

/// Runs `N = increments.steps()` steps from the initial pair.
pub fn run_trajectory(
    system: &SchemeSystem,
    init: &InitialPair,
    increments: &IncrementSet,
    record: &Record,
    mut diagnostics: Option<&mut dyn Write>,
) -> Result<Trajectory> {
    if increments.step != system.step_size() {
        return Err(invalid(format!(
            "increments are for step {}, system uses {}",
            increments.step,
            system.step_size()
        )));
    }
    let last = increments.steps();
    if last == 0 {
        return Err(invalid("trajectory needs at least one step"));
    }
    let tau = system.step_size().tau();
    let mut checkpoints = Vec::new();
    if record.wants(0, last) {
        checkpoints.push(Checkpoint {
            n: 0,
            t: 0.0,
            u: init.u0.clone(),
            v: init.v0.clone(),
        });
    }
    let io = |e: std::io::Error| invalid(format!("diagnostic stream: {e}"));
    if let Some(w) = diagnostics.as_deref_mut() {
        writeln!(w, "{DIAGNOSTIC_HEADER}").map_err(io)?;
    }
    let (mut state, report) = system.init_states(init, increments.bar[0], increments.hat[0])?;
    let mut reports = vec![report];
    loop {
        if let Some(w) = diagnostics.as_deref_mut() {
            write_diagnostic_line(w, reports.last().expect("one report per state")).map_err(io)?;
        }
        if record.wants(state.n, last) {
            checkpoints.push(Checkpoint {
                n: state.n,
                t: state.n as f64 * tau,
                u: state.u_curr.clone(),
                v: state.v_curr.clone(),
            });
        }
        if state.n == last {
            break;
        }
        let n = state.n;
        let (next, report) = system.step(&state, increments.bar[n], increments.hat[n])?;
        state = next;
        reports.push(report);
    }
    Ok(Trajectory { checkpoints, reports })
}

#[cfg(test)]
mod tests;
