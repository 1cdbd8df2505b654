use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::*;
use crate::fem::{interpolate_nodal, NormKind};
use crate::linalg::SparseMatrix;
use crate::mesh::{Mesh, Point};
use crate::model::{builtin_linear, builtin_trig, builtin_zero, default_initial_data, zero_initial_data};
use crate::noise::{sample_increments, NoiseConfig};

fn disc(n: usize) -> Arc<Discretization> {
    Arc::new(Discretization::from_mesh(Mesh::square(n).unwrap(), 1.0, 1.0).unwrap())
}

fn system(d: &Arc<Discretization>, c: Arc<dyn Coefficients>, denom: u64, settings: SchemeSettings) -> SchemeSystem {
    SchemeSystem::new(d.clone(), c, StepSize::from_denominator(denom).unwrap(), settings).unwrap()
}

fn dense(m: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.n(), m.n());
    for i in 0..m.n() {
        for (j, v) in m.row(i) {
            d[(i, j)] = v;
        }
    }
    d
}

fn nodal(c: &dyn Coefficients, f: impl Fn(&dyn Coefficients, Vec2) -> Vec2, u: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for v in 0..u.len() / 2 {
        let r = f(c, [u[2 * v], u[2 * v + 1]]);
        out[2 * v] = r[0];
        out[2 * v + 1] = r[1];
    }
    out
}

/// Solves the coupled `(U, V)` system of one step without elimination:
/// interior rows carry both variational equations, boundary rows pin zeros.
/// Only valid for drifts linear in `u`.
fn dense_step(
    d: &Discretization,
    c: &dyn Coefficients,
    s: &SchemeState,
    bar: f64,
    hat: f64,
    tau: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = d.n_dofs();
    let m = dense(d.mass());
    let a = dense(d.stiffness());
    let b = c.linear_drift().expect("linear drift");
    let bdiag = DMatrix::from_fn(n, n, |i, j| if i == j { b[i % 2] } else { 0.0 });
    let un = DVector::from_column_slice(s.u_curr.coeffs());
    let vn = DVector::from_column_slice(s.v_curr.coeffs());
    let up = DVector::from_column_slice(s.u_prev.coeffs());
    let g = nodal(c, |c, u| c.diffusion(u), s.u_curr.coeffs());
    let mut dg = DVector::zeros(n);
    for v in 0..n / 2 {
        let r = c.diffusion_derivative(s.u_curr.at_vertex(v), s.v_curr.at_vertex(v));
        dg[2 * v] = r[0];
        dg[2 * v + 1] = r[1];
    }
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    let mut rhs = DVector::zeros(2 * n);
    let mb = &m * &bdiag;
    let r1 = &m * (&un - &g * hat);
    let r2 = &m * &vn - (&a * &up) * (tau / 2.0) + (&mb * &up) * (tau / 2.0) + &m * &g * bar + &m * &dg * hat;
    let mask = d.dofmap().constrained_mask();
    for i in 0..n {
        if mask[i] {
            big[(i, i)] = 1.0;
            big[(n + i, n + i)] = 1.0;
            continue;
        }
        for j in 0..n {
            big[(i, j)] = m[(i, j)];
            big[(i, n + j)] = -tau * m[(i, j)];
            big[(n + i, n + j)] = m[(i, j)];
            big[(n + i, j)] = 0.5 * tau * a[(i, j)] - 0.5 * tau * mb[(i, j)];
        }
        rhs[i] = r1[i];
        rhs[n + i] = r2[i];
    }
    let x = big.lu().solve(&rhs).unwrap();
    (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
}

fn max_diff(a: &[f64], b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn zero_state_is_a_fixed_point() {
    let d = disc(3);
    for c in [builtin_linear(), builtin_zero()] {
        let sys = system(&d, c, 8, SchemeSettings::default());
        let init = sys.initial_pair(&zero_initial_data()).unwrap();
        let (s1, _) = sys.init_states(&init, 0.7, 0.01).unwrap();
        assert!(s1.u_curr.coeffs().iter().chain(s1.v_curr.coeffs()).all(|&x| x == 0.0));
        let (s2, r) = sys.step(&s1, -0.3, 0.02).unwrap();
        assert!(s2.u_curr.coeffs().iter().chain(s2.v_curr.coeffs()).all(|&x| x == 0.0));
        assert_eq!(r.energies.j, 0.0);
    }
}

#[test]
fn first_step_in_the_deterministic_limit_is_taylor() {
    let d = disc(4);
    let tau = 1.0 / 16.0;
    let sys = system(&d, builtin_zero(), 16, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let (s1, _) = sys.init_states(&init, 0.0, 0.0).unwrap();
    let l = d.discrete_l_constrained(&init.u0).unwrap();
    for i in 0..d.n_dofs() {
        let want = init.u0.coeffs()[i] + tau * init.v0.coeffs()[i] + 0.5 * tau * tau * l.coeffs()[i];
        assert!((s1.u_curr.coeffs()[i] - want).abs() < 1e-14);
    }
    let rev = system(&d, builtin_zero(), 16, SchemeSettings { first_step: FirstStep::Reversed, ..Default::default() });
    let (r1, _) = rev.init_states(&init, 0.0, 0.0).unwrap();
    for i in 0..d.n_dofs() {
        let want = init.u0.coeffs()[i] + tau * init.v0.coeffs()[i] - 0.5 * tau * tau * l.coeffs()[i];
        assert!((r1.u_curr.coeffs()[i] - want).abs() < 1e-14);
    }
}

#[test]
fn first_step_matches_dense_evaluation() {
    let d = disc(2);
    let tau = 0.25;
    let c = builtin_linear();
    let sys = system(&d, c.clone(), 4, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let (bar, hat) = (1.0, tau * tau);
    let (s1, _) = sys.init_states(&init, bar, hat).unwrap();

    let n = d.n_dofs();
    let m = dense(d.mass());
    let a = dense(d.stiffness());
    let u0 = DVector::from_column_slice(init.u0.coeffs());
    let v0 = DVector::from_column_slice(init.v0.coeffs());
    let f = nodal(c.as_ref(), |c, u| c.drift(0.0, u), init.u0.coeffs());
    let g = nodal(c.as_ref(), |c, u| c.diffusion(u), init.u0.coeffs());
    // 𝓛_h u⁰ + 𝒫_h F on interior dofs: restrict M to the interior block.
    let interior: Vec<usize> = (0..n).filter(|&i| !d.dofmap().constrained_mask()[i]).collect();
    let mi = DMatrix::from_fn(interior.len(), interior.len(), |r, s| m[(interior[r], interior[s])]);
    let load = -(&a * &u0) + &m * &f;
    let li = DVector::from_fn(interior.len(), |r, _| load[interior[r]]);
    let wi = mi.lu().solve(&li).unwrap();
    let mut w = DVector::zeros(n);
    for (r, &i) in interior.iter().enumerate() {
        w[i] = wi[r];
    }
    let mut want = &u0 + &v0 * tau + &w * (0.5 * tau * tau) - &g * hat + &g * (tau * bar);
    for &i in d.dofmap().constrained_dofs() {
        want[i] = 0.0;
    }
    assert!(max_diff(s1.u_curr.coeffs(), &want) <= 1e-10);
}

#[test]
fn steps_match_dense_coupled_solve() {
    let d = disc(2);
    assert_eq!(d.n_dofs(), 18);
    let tau = 0.125;
    let c = builtin_linear();
    for settings in [SchemeSettings::default(), SchemeSettings { drift_solve: DriftSolve::Picard, ..Default::default() }] {
        let sys = system(&d, c.clone(), 8, settings);
        let init = sys.initial_pair(&default_initial_data()).unwrap();
        let (bar, hat) = (1.0, tau * tau);
        let (mut s, _) = sys.init_states(&init, bar, hat).unwrap();
        for _ in 0..3 {
            let (uo, vo) = dense_step(&d, c.as_ref(), &s, bar, hat, tau);
            let (next, _) = sys.step(&s, bar, hat).unwrap();
            assert!(max_diff(next.u_curr.coeffs(), &uo) <= 1e-9);
            assert!(max_diff(next.v_curr.coeffs(), &vo) <= 1e-9);
            s = next;
        }
    }
}

#[test]
fn linear_shortcut_agrees_with_picard() {
    let d = disc(6);
    let inc = sample_increments(&NoiseConfig::with_steps(16, StepSize::from_denominator(16).unwrap(), 4, 0)).unwrap();
    let mut finals = Vec::new();
    for drift_solve in [DriftSolve::Auto, DriftSolve::Picard] {
        let sys = system(&d, builtin_linear(), 16, SchemeSettings { drift_solve, ..Default::default() });
        assert_eq!(sys.uses_linear_drift(), drift_solve == DriftSolve::Auto);
        let init = sys.initial_pair(&default_initial_data()).unwrap();
        let t = run_trajectory(&sys, &init, &inc, &Record::Final, None).unwrap();
        finals.push(t.checkpoints[0].u.coeffs().to_vec());
    }
    let worst = finals[0].iter().zip(&finals[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn deterministic_linear_step_is_plain_leapfrog() {
    let d = disc(4);
    let tau = 0.125;
    let sys = system(&d, builtin_zero(), 8, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let (s1, _) = sys.init_states(&init, 0.0, 0.0).unwrap();
    let (s2, r) = sys.step(&s1, 0.0, 0.0).unwrap();
    assert_eq!(r.picard_iterations, 1);
    let m = dense(d.mass());
    let a = dense(d.stiffness());
    let k = &m + &a * (0.5 * tau * tau);
    let rhs = &m * DVector::from_column_slice(s1.u_curr.coeffs()) + &m * DVector::from_column_slice(s1.v_curr.coeffs()) * tau
        - &a * DVector::from_column_slice(s1.u_prev.coeffs()) * (0.5 * tau * tau);
    let (mut kd, mut rd) = (k.clone(), rhs.clone());
    for &i in d.dofmap().constrained_dofs() {
        for j in 0..d.n_dofs() {
            kd[(i, j)] = 0.0;
            kd[(j, i)] = 0.0;
        }
        kd[(i, i)] = 1.0;
        rd[i] = 0.0;
    }
    let want = kd.lu().solve(&rd).unwrap();
    assert!(max_diff(s2.u_curr.coeffs(), &want) < 1e-12);
}

#[test]
fn displacement_equation_residual_vanishes() {
    let d = disc(5);
    let tau = 0.125;
    let sys = system(&d, builtin_trig(), 8, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let inc = sample_increments(&NoiseConfig::with_steps(8, StepSize::from_denominator(8).unwrap(), 9, 1)).unwrap();
    let (mut s, _) = sys.init_states(&init, inc.bar[0], inc.hat[0]).unwrap();
    for n in 1..8 {
        let (next, _) = sys.step(&s, inc.bar[n], inc.hat[n]).unwrap();
        let mut ghat = interpolate_nodal(&|_: Point| [0.0, 0.0], d.dofmap()).unwrap();
        for v in 0..d.mesh().n_vertices() {
            let g = TrigCoefficients.diffusion(s.u_curr.at_vertex(v));
            ghat.coeffs_mut()[2 * v] = g[0] * inc.hat[n];
            ghat.coeffs_mut()[2 * v + 1] = g[1] * inc.hat[n];
        }
        ghat.zero_boundary();
        let x: Vec<f64> = (0..d.n_dofs())
            .map(|i| next.u_curr.coeffs()[i] - s.u_curr.coeffs()[i] - tau * next.v_curr.coeffs()[i] + ghat.coeffs()[i])
            .collect();
        let r = d.mass().mul_vec(&x);
        let scale = d.norm(&next.u_curr, NormKind::L2).max(1.0);
        assert!(r.iter().all(|v| v.abs() <= 1e-9 * scale));
        s = next;
    }
}

use crate::model::TrigCoefficients;

#[test]
fn picard_contracts_at_the_drift_rate() {
    let d = disc(8);
    for (c, lip) in [(builtin_linear(), 3.0), (builtin_trig(), 2.0)] {
        let mut last = usize::MAX;
        for denom in [8u64, 16, 32, 64] {
            let tau = 1.0 / denom as f64;
            let settings = SchemeSettings { drift_solve: DriftSolve::Picard, ..Default::default() };
            let sys = system(&d, c.clone(), denom, settings);
            let init = sys.initial_pair(&default_initial_data()).unwrap();
            let inc = sample_increments(&NoiseConfig::with_steps(denom as usize, StepSize::from_denominator(denom).unwrap(), 1, 0)).unwrap();
            let t = run_trajectory(&sys, &init, &inc, &Record::Nothing, None).unwrap();
            let worst = t.reports.iter().map(|r| r.picard_iterations).max().unwrap();
            assert!(t.reports[1..].iter().all(|r| r.picard_residual <= 1e-10));
            assert!(worst <= last, "{} at 1/{denom}: {worst} after {last}", c.name());
            if denom >= 32 {
                assert!(worst <= 5, "{} at 1/{denom}: {worst}", c.name());
            }
            last = worst;

            // Residual history of the second step with the cap forcing an early stop.
            let capped = SchemeSettings { drift_solve: DriftSolve::Picard, picard_tolerance: 1e-300, picard_max_iterations: 3, ..Default::default() };
            let sys = system(&d, c.clone(), denom, capped);
            let (s1, _) = sys.init_states(&init, inc.bar[0], inc.hat[0]).unwrap();
            let Err(Error::StepFailure { residuals, .. }) = sys.step(&s1, inc.bar[1], inc.hat[1]) else {
                panic!("expected the cap to trigger");
            };
            for w in residuals.windows(2) {
                assert!(w[1] <= lip * tau * tau * w[0], "{} at 1/{denom}: {residuals:?}", c.name());
            }
        }
    }
}

#[test]
fn picard_failure_is_reported() {
    let d = disc(4);
    let settings = SchemeSettings {
        drift_solve: DriftSolve::Picard,
        picard_max_iterations: 1,
        ..Default::default()
    };
    let sys = system(&d, builtin_trig(), 4, settings);
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let (s1, _) = sys.init_states(&init, 0.1, 0.0).unwrap();
    match sys.step(&s1, 0.1, 0.001) {
        Err(Error::StepFailure { step, residuals }) => {
            assert_eq!(step, 2);
            assert_eq!(residuals.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn trajectory_replay_and_running_sum() {
    let d = disc(4);
    let sys = system(&d, builtin_trig(), 8, SchemeSettings { energies: EnergyLevel::Full, ..Default::default() });
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let inc = sample_increments(&NoiseConfig::with_steps(8, StepSize::from_denominator(8).unwrap(), 2, 5)).unwrap();
    let a = run_trajectory(&sys, &init, &inc, &Record::Every(1), None).unwrap();
    let b = run_trajectory(&sys, &init, &inc, &Record::Every(1), None).unwrap();
    assert_eq!(a.checkpoints.len(), 9);
    for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
        assert_eq!(x.u.coeffs(), y.u.coeffs());
        assert_eq!(x.v.coeffs(), y.v.coeffs());
    }
    assert_eq!(a.reports, b.reports);
    assert!(a.reports.iter().all(|r| r.energies.j_tilde.is_some() && r.energies.q_tilde.is_some()));

    // Replay the running sum from the recorded states.
    let (mut s, _) = sys.init_states(&init, inc.bar[0], inc.hat[0]).unwrap();
    let mut sum = s.u_curr.coeffs().to_vec();
    assert_eq!(s.u_running_sum.coeffs(), &sum[..]);
    for n in 1..8 {
        let (next, _) = sys.step(&s, inc.bar[n], inc.hat[n]).unwrap();
        for (acc, x) in sum.iter_mut().zip(next.u_curr.coeffs()) {
            *acc += x;
        }
        assert_eq!(next.u_running_sum.coeffs(), &sum[..]);
        assert!(next.u_curr.is_boundary_compliant() && next.v_curr.is_boundary_compliant());
        s = next;
    }

    let one = IncrementSet::from_increments(inc.step, vec![inc.bar[0]], vec![inc.hat[0]]).unwrap();
    let t1 = run_trajectory(&sys, &init, &one, &Record::Final, None).unwrap();
    let (s1, _) = sys.init_states(&init, inc.bar[0], inc.hat[0]).unwrap();
    assert_eq!(t1.reports.len(), 1);
    assert_eq!(t1.checkpoints[0].u.coeffs(), s1.u_curr.coeffs());
}

#[test]
fn diagnostics_stream_has_one_line_per_state() {
    let d = disc(3);
    let sys = system(&d, builtin_linear(), 4, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let inc = IncrementSet::zeros(StepSize::from_denominator(4).unwrap(), 4);
    let mut buf = Vec::new();
    run_trajectory(&sys, &init, &inc, &Record::Nothing, Some(&mut buf)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], DIAGNOSTIC_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("4,"));
}

#[test]
fn mismatched_increments_are_rejected() {
    let d = disc(2);
    let sys = system(&d, builtin_linear(), 4, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let inc = IncrementSet::zeros(StepSize::from_denominator(8).unwrap(), 8);
    assert!(run_trajectory(&sys, &init, &inc, &Record::Final, None).is_err());
}

#[test]
fn energy_values() {
    let d = disc(4);
    let z = d.zeros();
    assert_eq!(energy_j(&d, &z, &z), 0.0);
    assert_eq!(energy_q(&d, &z, &z, 0.1), 0.0);
    let x = interpolate_nodal(&|p: Point| [p[0], 0.0], d.dofmap()).unwrap();
    assert!((energy_j(&d, &x, &z) - (0.5 * 4.0 + 0.5 * 4.0)).abs() < 1e-12);
    let v = interpolate_nodal(&|p: Point| [p[1].sin(), p[0] * p[1]], d.dofmap()).unwrap();
    assert!((energy_j(&d, &z, &v) - d.norm(&v, NormKind::L2).powi(2)).abs() < 1e-14);
    assert_eq!(energy_j_tilde(&d, &z, &z).unwrap(), 0.0);
    assert_eq!(energy_q_tilde(&d, &z, &z, 0.1).unwrap(), 0.0);
}

#[test]
fn leapfrog_energy_is_conserved() {
    let d = Arc::new(Discretization::from_mesh(Mesh::square(16).unwrap(), 1.0, 1.0).unwrap());
    let sys = system(&d, builtin_zero(), 128, SchemeSettings::default());
    let init = sys.initial_pair(&default_initial_data()).unwrap();
    let inc = IncrementSet::zeros(StepSize::from_denominator(128).unwrap(), 128);
    let t = run_trajectory(&sys, &init, &inc, &Record::Nothing, None).unwrap();
    let e1 = t.reports[0].energies.leapfrog;
    assert!(e1 > 0.0);
    for r in &t.reports {
        assert!((r.energies.leapfrog - e1).abs() <= 1e-10 * e1);
    }
}

