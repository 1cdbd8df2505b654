//! Drift and diffusion coefficients, initial data and the manufactured
//! solution used for deterministic verification.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::fem::{DifferentiableField, VectorField};
use crate::mesh::{Point, Rect};

pub type Vec2 = [f64; 2];

/// Pointwise coefficients of `dv = (div σ(u) + F(t, u)) dt + G(u) dW`.
pub trait Coefficients: Send + Sync {
    fn name(&self) -> &str;

    /// `F(t, u)`.
    fn drift(&self, t: f64, u: Vec2) -> Vec2;

    /// Position-aware drift; defaults to [`drift`](Self::drift).
    fn drift_at(&self, t: f64, _x: Point, u: Vec2) -> Vec2 {
        self.drift(t, u)
    }

    /// `G(u)`.
    fn diffusion(&self, u: Vec2) -> Vec2;

    /// `[D_u G(u)] v`.
    fn diffusion_derivative(&self, u: Vec2, v: Vec2) -> Vec2;

    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }

    /// False when `F` ignores `u`, so the implicit drift needs no iteration.
    fn drift_depends_on_state(&self) -> bool {
        true
    }

    /// `Some(b)` when `F(t, u) = (b₀u₀, b₁u₁)` exactly.
    fn linear_drift(&self) -> Option<Vec2> {
        None
    }
}

/// `F(u) = −(u₁, 3u₂)`, `G(u) = (u₁, 3u₂)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearCoefficients;

impl Coefficients for LinearCoefficients {
    fn name(&self) -> &str {
        "linear"
    }

    fn drift(&self, _t: f64, u: Vec2) -> Vec2 {
        [-u[0], -3.0 * u[1]]
    }

    fn diffusion(&self, u: Vec2) -> Vec2 {
        [u[0], 3.0 * u[1]]
    }

    fn diffusion_derivative(&self, _u: Vec2, v: Vec2) -> Vec2 {
        [v[0], 3.0 * v[1]]
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(3.0)
    }

    fn linear_drift(&self) -> Option<Vec2> {
        Some([-1.0, -3.0])
    }
}

/// `F(u) = (cos u₁, 2 cos u₂)`, `G(u) = (sin u₁, 2 sin u₂)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigCoefficients;

impl Coefficients for TrigCoefficients {
    fn name(&self) -> &str {
        "trig"
    }

    fn drift(&self, _t: f64, u: Vec2) -> Vec2 {
        [u[0].cos(), 2.0 * u[1].cos()]
    }

    fn diffusion(&self, u: Vec2) -> Vec2 {
        [u[0].sin(), 2.0 * u[1].sin()]
    }

    fn diffusion_derivative(&self, u: Vec2, v: Vec2) -> Vec2 {
        [v[0] * u[0].cos(), 2.0 * v[1] * u[1].cos()]
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(2.0)
    }
}

/// `F = G = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCoefficients;

impl Coefficients for ZeroCoefficients {
    fn name(&self) -> &str {
        "zero"
    }

    fn drift(&self, _t: f64, _u: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn diffusion(&self, _u: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn diffusion_derivative(&self, _u: Vec2, _v: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(0.0)
    }

    fn drift_depends_on_state(&self) -> bool {
        false
    }

    fn linear_drift(&self) -> Option<Vec2> {
        Some([0.0; 2])
    }
}

pub fn builtin_linear() -> Arc<dyn Coefficients> {
    Arc::new(LinearCoefficients)
}

pub fn builtin_trig() -> Arc<dyn Coefficients> {
    Arc::new(TrigCoefficients)
}

pub fn builtin_zero() -> Arc<dyn Coefficients> {
    Arc::new(ZeroCoefficients)
}

/// Named coefficient packages selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientChoice {
    Linear,
    Trig,
    Zero,
}

impl CoefficientChoice {
    pub fn build(self) -> Arc<dyn Coefficients> {
        match self {
            CoefficientChoice::Linear => builtin_linear(),
            CoefficientChoice::Trig => builtin_trig(),
            CoefficientChoice::Zero => builtin_zero(),
        }
    }
}

impl fmt::Display for CoefficientChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientChoice::Linear => "linear",
            CoefficientChoice::Trig => "trig",
            CoefficientChoice::Zero => "zero",
        })
    }
}

impl FromStr for CoefficientChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "trig" => Ok(Self::Trig),
            "zero" => Ok(Self::Zero),
            _ => Err(invalid(format!("unknown coefficients '{s}' (expected linear, trig or zero)"))),
        }
    }
}

/// The first sine mode of a rectangle, `s(x, y) = sin(π(x−x₀)/w)·sin(π(y−y₀)/h)`,
/// times a constant direction.
#[derive(Debug, Clone, Copy)]
pub struct SineMode {
    pub domain: Rect,
    pub direction: Vec2,
}

impl SineMode {
    fn parts(&self, p: Point) -> (f64, f64, f64, f64, f64, f64) {
        let kx = PI / self.domain.width();
        let ky = PI / self.domain.height();
        let ax = kx * (p[0] - self.domain.x0);
        let ay = ky * (p[1] - self.domain.y0);
        (ax.sin(), ax.cos(), ay.sin(), ay.cos(), kx, ky)
    }

    pub fn shape(&self, p: Point) -> f64 {
        let (sx, _, sy, _, _, _) = self.parts(p);
        sx * sy
    }
}

impl VectorField for SineMode {
    fn value(&self, p: Point) -> Vec2 {
        let s = self.shape(p);
        [s * self.direction[0], s * self.direction[1]]
    }
}

impl DifferentiableField for SineMode {
    fn jacobian(&self, p: Point) -> [[f64; 2]; 2] {
        let (sx, cx, sy, cy, kx, ky) = self.parts(p);
        let g = [kx * cx * sy, ky * sx * cy];
        let d = self.direction;
        [[d[0] * g[0], d[0] * g[1]], [d[1] * g[0], d[1] * g[1]]]
    }
}

/// Zero vector field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn value(&self, _p: Point) -> Vec2 {
        [0.0; 2]
    }
}

impl DifferentiableField for ZeroField {
    fn jacobian(&self, _p: Point) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// `u(0) = u0`, `u_t(0) = v0`; `u0` must vanish on the boundary.
#[derive(Clone)]
pub struct InitialData {
    pub u0: Arc<dyn DifferentiableField + Send>,
    pub v0: Arc<dyn VectorField + Send>,
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("InitialData")
    }
}

/// `u0 = s·(1, −1)`, `v0 = s·(1, 1)`.
pub fn default_initial_data() -> InitialData {
    default_initial_data_on(Rect::symmetric_unit())
}

pub fn default_initial_data_on(domain: Rect) -> InitialData {
    InitialData {
        u0: Arc::new(SineMode {
            domain,
            direction: [1.0, -1.0],
        }),
        v0: Arc::new(SineMode {
            domain,
            direction: [1.0, 1.0],
        }),
    }
}

/// `u0 = 0`, `v0 = s·(1, 1)`. Unlike [`default_initial_data`], this is
/// compatible with the Dirichlet condition to second order (`u_tt(0) = 0` on
/// the boundary), so the velocity keeps full spatial regularity.
pub fn at_rest_initial_data() -> InitialData {
    InitialData {
        u0: Arc::new(ZeroField),
        v0: Arc::new(SineMode {
            domain: Rect::symmetric_unit(),
            direction: [1.0, 1.0],
        }),
    }
}

pub fn zero_initial_data() -> InitialData {
    InitialData {
        u0: Arc::new(ZeroField),
        v0: Arc::new(ZeroField),
    }
}

/// Manufactured solution `u*(t, x) = cos(ωt)·s(x)·(1, −1)` on a rectangle,
/// together with the source that makes it exact with `G ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub mode: SineMode,
    pub omega: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Manufactured {
    pub fn new(domain: Rect, lambda: f64, mu: f64) -> Self {
        Self {
            mode: SineMode {
                domain,
                direction: [1.0, -1.0],
            },
            omega: PI,
            lambda,
            mu,
        }
    }

    pub fn displacement(&self, t: f64, p: Point) -> Vec2 {
        let c = (self.omega * t).cos();
        let v = self.mode.value(p);
        [c * v[0], c * v[1]]
    }

    pub fn velocity(&self, t: f64, p: Point) -> Vec2 {
        let c = -self.omega * (self.omega * t).sin();
        let v = self.mode.value(p);
        [c * v[0], c * v[1]]
    }

    pub fn displacement_jacobian(&self, t: f64, p: Point) -> [[f64; 2]; 2] {
        let c = (self.omega * t).cos();
        self.mode.jacobian(p).map(|r| r.map(|x| c * x))
    }

    /// `u*_tt − div σ(u*)`.
    pub fn source(&self, t: f64, p: Point) -> Vec2 {
        let (sx, cx, sy, cy, kx, ky) = self.mode.parts(p);
        let s = sx * sy;
        let cc = cx * cy;
        let (l, m) = (self.lambda, self.mu);
        let d = self.mode.direction;
        // div σ(w) = (λ + μ/2)∇div w + (μ/2)Δw for w = s·d.
        let grad_div = [
            -d[0] * kx * kx * s + d[1] * kx * ky * cc,
            d[0] * kx * ky * cc - d[1] * ky * ky * s,
        ];
        let lap = -(kx * kx + ky * ky) * s;
        let c = (self.omega * t).cos();
        let mut f = [0.0; 2];
        for i in 0..2 {
            let div_sigma = (l + 0.5 * m) * grad_div[i] + 0.5 * m * lap * d[i];
            f[i] = c * (-self.omega * self.omega * s * d[i] - div_sigma);
        }
        f
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            u0: Arc::new(self.mode),
            v0: Arc::new(ZeroField),
        }
    }

    pub fn coefficients(&self) -> Arc<dyn Coefficients> {
        Arc::new(ManufacturedCoefficients(*self))
    }
}

/// `F(t, x, u) = f(t, x)`, `G ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCoefficients(pub Manufactured);

impl Coefficients for ManufacturedCoefficients {
    fn name(&self) -> &str {
        "manufactured"
    }

    fn drift(&self, _t: f64, _u: Vec2) -> Vec2 {
        // Only meaningful with a position; see `drift_at`.
        [0.0; 2]
    }

    fn drift_at(&self, t: f64, x: Point, _u: Vec2) -> Vec2 {
        self.0.source(t, x)
    }

    fn diffusion(&self, _u: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn diffusion_derivative(&self, _u: Vec2, _v: Vec2) -> Vec2 {
        [0.0; 2]
    }

    fn drift_depends_on_state(&self) -> bool {
        false
    }
}

/// Sampled surrogate checks of the structural assumptions on `F` and `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    /// Largest observed `‖G(u) − G(w)‖ / ‖u − w‖`.
    pub g_lipschitz: f64,
    /// Largest observed `‖F(0, u) − F(0, w)‖ / ‖u − w‖`.
    pub f_lipschitz: f64,
    /// Largest central-difference mismatch of `D_u G`, relative to `1 + ‖v‖`.
    pub dg_fd_error: f64,
    /// Largest deviation of `D_u G(u)` from linearity in its direction.
    pub dg_linearity_error: f64,
    pub f_at_zero: f64,
    pub g_at_zero: f64,
}

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

/// Samples `u, v ∈ [−10, 10]²`. Besides random pairs, each sample also probes
/// differences along the coordinate axes, where componentwise coefficients
/// attain their Lipschitz constants.
pub fn check_assumptions(c: &dyn Coefficients, samples: usize, seed: u64) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| -> Vec2 { [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)] };
    let delta = 1e-6;
    let mut r = AssumptionReport {
        samples,
        g_lipschitz: 0.0,
        f_lipschitz: 0.0,
        dg_fd_error: 0.0,
        dg_linearity_error: 0.0,
        f_at_zero: norm(c.drift(0.0, [0.0; 2])),
        g_at_zero: norm(c.diffusion([0.0; 2])),
    };
    for _ in 0..samples {
        let u = pick(&mut rng);
        let v = pick(&mut rng);
        let w = pick(&mut rng);
        let h = 1e-3;
        for other in [w, [u[0] + h, u[1]], [u[0], u[1] + h]] {
            let d = norm(sub(u, other));
            if d > 0.0 {
                r.g_lipschitz = r.g_lipschitz.max(norm(sub(c.diffusion(u), c.diffusion(other))) / d);
                r.f_lipschitz = r.f_lipschitz.max(norm(sub(c.drift(0.0, u), c.drift(0.0, other))) / d);
            }
        }
        let plus = c.diffusion([u[0] + delta * v[0], u[1] + delta * v[1]]);
        let minus = c.diffusion([u[0] - delta * v[0], u[1] - delta * v[1]]);
        let fd = [(plus[0] - minus[0]) / (2.0 * delta), (plus[1] - minus[1]) / (2.0 * delta)];
        r.dg_fd_error = r.dg_fd_error.max(norm(sub(fd, c.diffusion_derivative(u, v))) / (1.0 + norm(v)));
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let combo = c.diffusion_derivative(u, [a * v[0] + b * w[0], a * v[1] + b * w[1]]);
        let dv = c.diffusion_derivative(u, v);
        let dw = c.diffusion_derivative(u, w);
        let lin = [a * dv[0] + b * dw[0], a * dv[1] + b * dw[1]];
        r.dg_linearity_error = r.dg_linearity_error.max(norm(sub(combo, lin)));
    }
    r
}
