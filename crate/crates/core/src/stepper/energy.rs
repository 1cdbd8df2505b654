use crate::error::Result;
use crate::fem::{Discretization, FeFunction, NormKind};

/// Energy functionals of one state; the `𝓛_h`-based ones are optional.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Energies {
    pub j: f64,
    pub q: f64,
    /// `‖vⁿ‖² + ½(a(uⁿ) + a(uⁿ⁻¹))`, exactly conserved by the deterministic leapfrog.
    pub leapfrog: f64,
    pub j_tilde: Option<f64>,
    pub q_tilde: Option<f64>,
}

fn sq(d: &Discretization, u: &FeFunction, k: NormKind) -> f64 {
    d.norm(u, k).powi(2)
}

/// `𝒥(u, v) = ‖v‖² + (λ/2)‖div u‖² + (μ/2)‖ε(u)‖²`.
pub fn energy_j(d: &Discretization, u: &FeFunction, v: &FeFunction) -> f64 {
    sq(d, v, NormKind::L2) + 0.5 * d.lambda() * sq(d, u, NormKind::Div) + 0.5 * d.mu() * sq(d, u, NormKind::Eps)
}

/// `𝒥̃(u, v) = ‖𝓛_h u‖² + λ‖div v‖² + μ‖ε(v)‖²`.
pub fn energy_j_tilde(d: &Discretization, u: &FeFunction, v: &FeFunction) -> Result<f64> {
    let lu = d.discrete_l_constrained(u)?;
    Ok(sq(d, &lu, NormKind::L2) + d.lambda() * sq(d, v, NormKind::Div) + d.mu() * sq(d, v, NormKind::Eps))
}

/// `𝒬(u, ū) = ½‖u‖² + (τ²/4)λ‖div ū‖² + (τ²/2)μ‖ε(ū)‖²`.
pub fn energy_q(d: &Discretization, u: &FeFunction, ubar: &FeFunction, tau: f64) -> f64 {
    let t2 = tau * tau;
    0.5 * sq(d, u, NormKind::L2) + 0.25 * t2 * d.lambda() * sq(d, ubar, NormKind::Div) + 0.5 * t2 * d.mu() * sq(d, ubar, NormKind::Eps)
}

/// `𝒬̃(u, ū) = (λ/2)‖div u‖² + (μ/2)‖ε(u)‖² + (τ²/4)‖𝓛_h ū‖²`.
pub fn energy_q_tilde(d: &Discretization, u: &FeFunction, ubar: &FeFunction, tau: f64) -> Result<f64> {
    let lu = d.discrete_l_constrained(ubar)?;
    Ok(0.5 * d.lambda() * sq(d, u, NormKind::Div) + 0.5 * d.mu() * sq(d, u, NormKind::Eps) + 0.25 * tau * tau * sq(d, &lu, NormKind::L2))
}

/// `‖v‖² + ½(a(u) + a(u_prev))` with `a` the elasticity form.
pub fn energy_leapfrog(d: &Discretization, u: &FeFunction, u_prev: &FeFunction, v: &FeFunction) -> f64 {
    sq(d, v, NormKind::L2) + 0.5 * (d.energy_form(u.coeffs(), u.coeffs()) + d.energy_form(u_prev.coeffs(), u_prev.coeffs()))
}
