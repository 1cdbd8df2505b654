//! Vector-valued P1 finite elements on structured triangulations.
//!
//! A [`Discretization`] bundles a dof map with every matrix the scheme and
//! the studies need, plus lazily prepared solvers for them. Displacements and
//! velocities both carry homogeneous Dirichlet conditions.

mod assembly;
pub mod quadrature;
mod transfer;

use std::sync::{Arc, OnceLock};

pub use assembly::{apply_dirichlet, assemble_elasticity, assemble_forms, assemble_mass, Forms};
pub use transfer::{prolong, Prolongation};

use crate::error::{invalid, Error, Result};
use crate::linalg::{prepare_spd, SolverHandle, SparseMatrix};
use crate::mesh::{Mesh, Point};

pub(crate) use assembly::element_geometry;
use assembly::combine_elasticity;
pub(crate) use assembly::check_moduli;
use quadrature::{map_point, DUNAVANT4, EDGE_MIDPOINT};

/// Dof layout: vertex `v`, component `c` maps to `2v + c`.
#[derive(Debug)]
pub struct DofMap {
    mesh: Arc<Mesh>,
    constrained: Vec<bool>,
    constrained_dofs: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let n = 2 * mesh.n_vertices();
        let mut constrained = vec![false; n];
        let mut constrained_dofs = Vec::with_capacity(2 * mesh.boundary_vertices().len());
        for &v in mesh.boundary_vertices() {
            for c in 0..2 {
                constrained[Self::dof(v, c)] = true;
                constrained_dofs.push(Self::dof(v, c));
            }
        }
        constrained_dofs.sort_unstable();
        Self {
            mesh,
            constrained,
            constrained_dofs,
        }
    }

    #[inline]
    pub fn dof(vertex: usize, component: usize) -> usize {
        2 * vertex + component
    }

    #[inline]
    pub fn vertex_component(dof: usize) -> (usize, usize) {
        (dof / 2, dof % 2)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.constrained.len()
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_dofs
    }

    /// True when both maps describe the same mesh.
    pub fn same_space(&self, other: &DofMap) -> bool {
        std::ptr::eq(self, other)
            || (self.mesh.nx() == other.mesh.nx()
                && self.mesh.ny() == other.mesh.ny()
                && self.mesh.domain() == other.mesh.domain())
    }

    pub fn zero_constrained(&self, x: &mut [f64]) {
        for &d in &self.constrained_dofs {
            x[d] = 0.0;
        }
    }
}

/// Coefficient vector of a P1 function on a given dof map.
#[derive(Debug, Clone)]
pub struct FeFunction {
    dofmap: Arc<DofMap>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(dofmap: Arc<DofMap>) -> Self {
        let n = dofmap.n_dofs();
        Self {
            dofmap,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(dofmap: Arc<DofMap>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofmap.n_dofs() {
            return Err(invalid(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                dofmap.n_dofs()
            )));
        }
        Ok(Self { dofmap, coeffs })
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn at_vertex(&self, v: usize) -> [f64; 2] {
        [self.coeffs[DofMap::dof(v, 0)], self.coeffs[DofMap::dof(v, 1)]]
    }

    /// All constrained coefficients are exactly zero.
    pub fn is_boundary_compliant(&self) -> bool {
        self.dofmap.constrained_dofs().iter().all(|&d| self.coeffs[d] == 0.0)
    }

    pub fn zero_boundary(&mut self) {
        self.dofmap.zero_constrained(&mut self.coeffs);
    }
}

/// Pointwise vector field on the plane.
pub trait VectorField: Sync {
    fn value(&self, p: Point) -> [f64; 2];
}

impl<F: Fn(Point) -> [f64; 2] + Sync> VectorField for F {
    fn value(&self, p: Point) -> [f64; 2] {
        self(p)
    }
}

/// Vector field with its Jacobian `J[i][j] = ∂ⱼ fᵢ`.
pub trait DifferentiableField: VectorField {
    fn jacobian(&self, p: Point) -> [[f64; 2]; 2];
}

/// Pairs a value closure with a Jacobian closure.
pub struct WithJacobian<F, J> {
    pub value: F,
    pub jacobian: J,
}

impl<F, J> VectorField for WithJacobian<F, J>
where
    F: Fn(Point) -> [f64; 2] + Sync,
    J: Fn(Point) -> [[f64; 2]; 2] + Sync,
{
    fn value(&self, p: Point) -> [f64; 2] {
        (self.value)(p)
    }
}

impl<F, J> DifferentiableField for WithJacobian<F, J>
where
    F: Fn(Point) -> [f64; 2] + Sync,
    J: Fn(Point) -> [[f64; 2]; 2] + Sync,
{
    fn jacobian(&self, p: Point) -> [[f64; 2]; 2] {
        (self.jacobian)(p)
    }
}

/// Input to [`Discretization::l2_project`].
pub enum L2Source<'a> {
    Field(&'a dyn VectorField),
    Fine(&'a FeFunction),
}

/// Input to [`Discretization::elasticity_project`].
pub enum RitzSource<'a> {
    Field(&'a dyn DifferentiableField),
    Fine(&'a FeFunction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1Semi,
    Div,
    Eps,
}

/// Nodal values of `f`.
pub fn interpolate_nodal(f: &dyn VectorField, dofmap: &Arc<DofMap>) -> Result<FeFunction> {
    let mesh = dofmap.mesh();
    let mut coeffs = vec![0.0; dofmap.n_dofs()];
    for (v, &p) in mesh.vertices().iter().enumerate() {
        let val = f.value(p);
        if !(val[0].is_finite() && val[1].is_finite()) {
            return Err(Error::Evaluation {
                vertex: v,
                x: p[0],
                y: p[1],
            });
        }
        coeffs[DofMap::dof(v, 0)] = val[0];
        coeffs[DofMap::dof(v, 1)] = val[1];
    }
    FeFunction::from_coeffs(dofmap.clone(), coeffs)
}

/// `‖u_h − f‖_{L²}` by six-point quadrature.
pub fn l2_error_against(u: &FeFunction, f: &dyn VectorField) -> f64 {
    let mesh = u.dofmap().mesh();
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let (area, _) = element_geometry(&p);
        let uv = tri.map(|v| u.at_vertex(v));
        for &(bary, w) in &DUNAVANT4 {
            let x = map_point(bary, &p);
            let fx = f.value(x);
            for c in 0..2 {
                let uh = bary[0] * uv[0][c] + bary[1] * uv[1][c] + bary[2] * uv[2][c];
                acc += w * area * (uh - fx[c]).powi(2);
            }
        }
    }
    acc.sqrt()
}

/// `|u_h − f|_{H¹}` by six-point quadrature.
pub fn h1_semi_error_against(u: &FeFunction, f: &dyn DifferentiableField) -> f64 {
    let mesh = u.dofmap().mesh();
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        let (area, g) = element_geometry(&p);
        let mut jh = [[0.0; 2]; 2];
        for (a, &v) in tri.iter().enumerate() {
            let uv = u.at_vertex(v);
            for c in 0..2 {
                for d in 0..2 {
                    jh[c][d] += uv[c] * g[a][d];
                }
            }
        }
        for &(bary, w) in &DUNAVANT4 {
            let j = f.jacobian(map_point(bary, &p));
            let mut s = 0.0;
            for c in 0..2 {
                for d in 0..2 {
                    s += (jh[c][d] - j[c][d]).powi(2);
                }
            }
            acc += w * area * s;
        }
    }
    acc.sqrt()
}

/// Everything assembled on one mesh for one pair of Lamé moduli.
#[derive(Debug)]
pub struct Discretization {
    dofmap: Arc<DofMap>,
    lambda: f64,
    mu: f64,
    forms: Forms,
    stiffness: SparseMatrix,
    stiffness_dir: SparseMatrix,
    mass_dir: SparseMatrix,
    mass_solver: OnceLock<SolverHandle>,
    mass_dir_solver: OnceLock<SolverHandle>,
    stiffness_dir_solver: OnceLock<SolverHandle>,
}

fn lazy<'a>(cell: &'a OnceLock<SolverHandle>, m: &SparseMatrix) -> Result<&'a SolverHandle> {
    if let Some(h) = cell.get() {
        return Ok(h);
    }
    let h = prepare_spd(m)?;
    Ok(cell.get_or_init(|| h))
}

impl Discretization {
    pub fn new(dofmap: Arc<DofMap>, lambda: f64, mu: f64) -> Result<Self> {
        check_moduli(lambda, mu)?;
        let forms = assemble_forms(&dofmap)?;
        let stiffness = combine_elasticity(&forms, lambda, mu)?;
        let mask = dofmap.constrained_mask();
        let stiffness_dir = apply_dirichlet(&stiffness, mask)?;
        let mass_dir = apply_dirichlet(&forms.mass, mask)?;
        Ok(Self {
            dofmap,
            lambda,
            mu,
            forms,
            stiffness,
            stiffness_dir,
            mass_dir,
            mass_solver: OnceLock::new(),
            mass_dir_solver: OnceLock::new(),
            stiffness_dir_solver: OnceLock::new(),
        })
    }

    pub fn from_mesh(mesh: Mesh, lambda: f64, mu: f64) -> Result<Self> {
        Self::new(Arc::new(DofMap::new(Arc::new(mesh))), lambda, mu)
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn mesh(&self) -> &Mesh {
        self.dofmap.mesh()
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn forms(&self) -> &Forms {
        &self.forms
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.forms.mass
    }

    /// `λ A_div + μ A_ε` without boundary conditions.
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn stiffness_dir(&self) -> &SparseMatrix {
        &self.stiffness_dir
    }

    pub fn mass_dir(&self) -> &SparseMatrix {
        &self.mass_dir
    }

    pub fn mass_solver(&self) -> Result<&SolverHandle> {
        lazy(&self.mass_solver, &self.forms.mass)
    }

    pub fn mass_dir_solver(&self) -> Result<&SolverHandle> {
        lazy(&self.mass_dir_solver, &self.mass_dir)
    }

    pub fn stiffness_dir_solver(&self) -> Result<&SolverHandle> {
        lazy(&self.stiffness_dir_solver, &self.stiffness_dir)
    }

    pub fn zeros(&self) -> FeFunction {
        FeFunction::zeros(self.dofmap.clone())
    }

    pub fn function(&self, coeffs: Vec<f64>) -> Result<FeFunction> {
        FeFunction::from_coeffs(self.dofmap.clone(), coeffs)
    }

    fn check_space(&self, u: &FeFunction) -> Result<()> {
        if u.dofmap().same_space(&self.dofmap) {
            Ok(())
        } else {
            Err(invalid("function lives on a different mesh"))
        }
    }

    /// `(f, φᵢ)` for every dof, by the edge-midpoint rule.
    pub fn load(&self, f: &dyn VectorField) -> Vec<f64> {
        let mesh = self.mesh();
        let mut b = vec![0.0; self.n_dofs()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = mesh.triangle_points(t);
            let (area, _) = element_geometry(&p);
            for &(bary, w) in &EDGE_MIDPOINT {
                let fx = f.value(map_point(bary, &p));
                for (a, &v) in tri.iter().enumerate() {
                    let s = w * area * bary[a];
                    b[DofMap::dof(v, 0)] += s * fx[0];
                    b[DofMap::dof(v, 1)] += s * fx[1];
                }
            }
        }
        b
    }

    fn fine_load(&self, fine: &FeFunction, op: impl Fn(&Forms) -> Result<SparseMatrix>) -> Result<Vec<f64>> {
        let p = Prolongation::new(&self.dofmap, fine.dofmap())?;
        let forms = assemble_forms(fine.dofmap())?;
        let m = op(&forms)?;
        Ok(p.transpose_apply_raw(&m.mul_vec(fine.coeffs())))
    }

    /// L² projection onto the full P1 space (no boundary condition).
    pub fn l2_project(&self, src: L2Source<'_>) -> Result<FeFunction> {
        let b = match src {
            L2Source::Field(f) => self.load(f),
            L2Source::Fine(u) => self.fine_load(u, |f| Ok(f.mass.clone()))?,
        };
        self.function(self.mass_solver()?.solve(&b)?)
    }

    /// L² projection onto the boundary-compliant subspace.
    pub fn l2_project_constrained(&self, src: L2Source<'_>) -> Result<FeFunction> {
        let mut b = match src {
            L2Source::Field(f) => self.load(f),
            L2Source::Fine(u) => self.fine_load(u, |f| Ok(f.mass.clone()))?,
        };
        self.dofmap.zero_constrained(&mut b);
        self.function(self.mass_dir_solver()?.solve(&b)?)
    }

    /// Projection orthogonal in `a(·,·)` onto the boundary-compliant subspace.
    pub fn elasticity_project(&self, src: RitzSource<'_>) -> Result<FeFunction> {
        let mut b = match src {
            RitzSource::Field(w) => {
                self.check_field_boundary(w)?;
                self.elasticity_load(w)
            }
            RitzSource::Fine(u) => {
                let worst = u
                    .dofmap()
                    .constrained_dofs()
                    .iter()
                    .map(|&d| u.coeffs()[d].abs())
                    .fold(0.0, f64::max);
                if worst > 1e-10 {
                    return Err(invalid(format!("field violates the boundary condition by {worst:.3e}")));
                }
                self.fine_load(u, |f| combine_elasticity(f, self.lambda, self.mu))?
            }
        };
        self.dofmap.zero_constrained(&mut b);
        self.function(self.stiffness_dir_solver()?.solve(&b)?)
    }

    fn check_field_boundary(&self, w: &dyn VectorField) -> Result<()> {
        let mesh = self.mesh();
        for &v in mesh.boundary_vertices() {
            let p = mesh.vertices()[v];
            let val = w.value(p);
            if val[0].abs() > 1e-10 || val[1].abs() > 1e-10 || !val[0].is_finite() || !val[1].is_finite() {
                return Err(invalid(format!(
                    "field does not vanish at boundary point ({}, {}): ({:e}, {:e})",
                    p[0], p[1], val[0], val[1]
                )));
            }
        }
        Ok(())
    }

    /// `a(w, φᵢ)` for every dof, by the edge-midpoint rule on `∇w`.
    pub fn elasticity_load(&self, w: &dyn DifferentiableField) -> Vec<f64> {
        let mesh = self.mesh();
        let mut b = vec![0.0; self.n_dofs()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = mesh.triangle_points(t);
            let (area, g) = element_geometry(&p);
            for &(bary, wq) in &EDGE_MIDPOINT {
                let j = w.jacobian(map_point(bary, &p));
                let div = j[0][0] + j[1][1];
                let off = 0.5 * (j[0][1] + j[1][0]);
                let eps = [[j[0][0], off], [off, j[1][1]]];
                for (a, &v) in tri.iter().enumerate() {
                    for c in 0..2 {
                        let e = eps[c][0] * g[a][0] + eps[c][1] * g[a][1];
                        b[DofMap::dof(v, c)] += wq * area * (self.lambda * div * g[a][c] + self.mu * e);
                    }
                }
            }
        }
        b
    }

    /// `𝓛_h w`: solves `M x = −A w` over the full P1 space, so
    /// `−(𝓛_h w, v) = a(w, v)` for every P1 `v`.
    pub fn discrete_l(&self, w: &FeFunction) -> Result<FeFunction> {
        self.check_space(w)?;
        let mut b = self.stiffness.mul_vec(w.coeffs());
        b.iter_mut().for_each(|x| *x = -*x);
        self.function(self.mass_solver()?.solve(&b)?)
    }

    /// `𝓛_h w` restricted to boundary-compliant test functions: the identity
    /// holds for every `v` vanishing on the boundary, and the result does too.
    pub fn discrete_l_constrained(&self, w: &FeFunction) -> Result<FeFunction> {
        self.check_space(w)?;
        let mut b = self.stiffness.mul_vec(w.coeffs());
        b.iter_mut().for_each(|x| *x = -*x);
        self.dofmap.zero_constrained(&mut b);
        self.function(self.mass_dir_solver()?.solve(&b)?)
    }

    pub fn norm(&self, u: &FeFunction, kind: NormKind) -> f64 {
        self.norm_raw(u.coeffs(), kind)
    }

    pub fn norm_raw(&self, u: &[f64], kind: NormKind) -> f64 {
        let m = match kind {
            NormKind::L2 => &self.forms.mass,
            NormKind::H1Semi => &self.forms.grad,
            NormKind::Div => &self.forms.div,
            NormKind::Eps => &self.forms.eps,
        };
        m.quad_form(u).max(0.0).sqrt()
    }

    /// `a(u, v) = λ(div u, div v) + μ(ε(u), ε(v))`.
    pub fn energy_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.bilinear(u, v)
    }
}

#[cfg(test)]
mod tests;
