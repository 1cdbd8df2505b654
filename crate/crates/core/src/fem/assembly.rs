//! Element integrals and global assembly for vector P1 elements.

use crate::error::{invalid, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Point;

use super::DofMap;

/// Area and barycentric gradients of a counterclockwise triangle.
pub(crate) fn element_geometry(p: &[Point; 3]) -> (f64, [[f64; 2]; 3]) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det;
    let g = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    (area, g)
}

/// The unit-coefficient bilinear forms of the vector P1 space.
#[derive(Debug, Clone)]
pub struct Forms {
    /// `(u, φ)`.
    pub mass: SparseMatrix,
    /// `(div u, div φ)`.
    pub div: SparseMatrix,
    /// `(ε(u), ε(φ))` with the Frobenius pairing.
    pub eps: SparseMatrix,
    /// `(∇u, ∇φ)`.
    pub grad: SparseMatrix,
}

/// Assembles mass, divergence, strain and full-gradient forms in one sweep.
pub fn assemble_forms(dofmap: &DofMap) -> Result<Forms> {
    let mesh = dofmap.mesh();
    let n = dofmap.n_dofs();
    let cap = 36 * mesh.triangles().len();
    let mut mass = TripletBuilder::with_capacity(n, cap / 2);
    let mut div = TripletBuilder::with_capacity(n, cap);
    let mut eps = TripletBuilder::with_capacity(n, cap);
    let mut grad = TripletBuilder::with_capacity(n, cap / 2);

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (area, g) = element_geometry(&mesh.triangle_points(t));
        for a in 0..3 {
            for b in 0..3 {
                let gab = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                for c in 0..2 {
                    let i = DofMap::dof(tri[a], c);
                    for d in 0..2 {
                        let j = DofMap::dof(tri[b], d);
                        div.add(i, j, area * (g[a][c] * g[b][d]));
                        let diag = if c == d { gab } else { 0.0 };
                        eps.add(i, j, area * (0.5 * (diag + g[a][d] * g[b][c])));
                        if c == d {
                            mass.add(i, j, m);
                            grad.add(i, j, area * gab);
                        }
                    }
                }
            }
        }
    }
    Ok(Forms {
        mass: mass.finalize_symmetric()?,
        div: div.finalize_symmetric()?,
        eps: eps.finalize_symmetric()?,
        grad: grad.finalize_symmetric()?,
    })
}

pub fn assemble_mass(dofmap: &DofMap) -> Result<SparseMatrix> {
    Ok(assemble_forms(dofmap)?.mass)
}

/// `λ(div u, div φ) + μ(ε(u), ε(φ))`.
pub fn assemble_elasticity(dofmap: &DofMap, lambda: f64, mu: f64) -> Result<SparseMatrix> {
    check_moduli(lambda, mu)?;
    let f = assemble_forms(dofmap)?;
    combine_elasticity(&f, lambda, mu)
}

pub(crate) fn combine_elasticity(f: &Forms, lambda: f64, mu: f64) -> Result<SparseMatrix> {
    f.div.linear_combination(lambda, &f.eps, mu)
}

pub(crate) fn check_moduli(lambda: f64, mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("shear modulus mu must be positive, got {mu}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("Lamé modulus lambda must be non-negative, got {lambda}")));
    }
    Ok(())
}

/// Symmetric elimination of the constrained dofs; callers zero the matching
/// right-hand-side entries.
pub fn apply_dirichlet(a: &SparseMatrix, constrained: &[bool]) -> Result<SparseMatrix> {
    a.eliminate(constrained)
}
