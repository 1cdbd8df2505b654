//! Prolongation between nested meshes and its transpose.

use std::sync::Arc;

use crate::error::{invalid, Result};

use super::{DofMap, FeFunction};

/// Exact embedding of coarse P1 functions into a nested fine space.
///
/// Every fine vertex stores the three coarse vertices of the coarse triangle
/// containing it together with its barycentric weights there.
#[derive(Debug, Clone)]
pub struct Prolongation {
    coarse: Arc<DofMap>,
    fine: Arc<DofMap>,
    weights: Vec<[(usize, f64); 3]>,
}

impl Prolongation {
    pub fn new(coarse: &Arc<DofMap>, fine: &Arc<DofMap>) -> Result<Self> {
        let (cm, fm) = (coarse.mesh(), fine.mesh());
        let depth = fm
            .refinement_depth_from(cm)
            .ok_or_else(|| invalid("fine mesh is not a uniform refinement of the coarse mesh"))?;
        let r = 1usize << depth;
        let rf = r as f64;
        let (nx, ny) = (cm.nx(), cm.ny());
        let mut weights = Vec::with_capacity(fm.n_vertices());
        for fj in 0..=fm.ny() {
            let (cj, bn) = split(fj, r, ny);
            for fi in 0..=fm.nx() {
                let (ci, an) = split(fi, r, nx);
                let (a, b) = (an as f64 / rf, bn as f64 / rf);
                let v00 = cm.vertex_index(ci, cj);
                let v10 = cm.vertex_index(ci + 1, cj);
                let v11 = cm.vertex_index(ci + 1, cj + 1);
                let v01 = cm.vertex_index(ci, cj + 1);
                let w = if an >= bn {
                    [(v00, 1.0 - a), (v10, a - b), (v11, b)]
                } else {
                    [(v00, 1.0 - b), (v11, a), (v01, b - a)]
                };
                weights.push(w);
            }
        }
        Ok(Self {
            coarse: coarse.clone(),
            fine: fine.clone(),
            weights,
        })
    }

    pub fn coarse(&self) -> &Arc<DofMap> {
        &self.coarse
    }

    pub fn fine(&self) -> &Arc<DofMap> {
        &self.fine
    }

    /// Fine coefficients of a coarse coefficient vector.
    pub fn apply_raw(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.coarse.n_dofs());
        let mut out = vec![0.0; self.fine.n_dofs()];
        for (v, w) in self.weights.iter().enumerate() {
            for c in 0..2 {
                out[DofMap::dof(v, c)] = w.iter().map(|&(cv, wt)| wt * coarse[DofMap::dof(cv, c)]).sum();
            }
        }
        out
    }

    /// Transpose of [`apply_raw`](Self::apply_raw): restricts fine dual
    /// vectors (loads) to the coarse space.
    pub fn transpose_apply_raw(&self, fine: &[f64]) -> Vec<f64> {
        assert_eq!(fine.len(), self.fine.n_dofs());
        let mut out = vec![0.0; self.coarse.n_dofs()];
        for (v, w) in self.weights.iter().enumerate() {
            for c in 0..2 {
                let f = fine[DofMap::dof(v, c)];
                for &(cv, wt) in w {
                    out[DofMap::dof(cv, c)] += wt * f;
                }
            }
        }
        out
    }

    pub fn apply(&self, u: &FeFunction) -> Result<FeFunction> {
        if !u.dofmap().same_space(&self.coarse) {
            return Err(invalid("function does not live on the coarse space of this prolongation"));
        }
        FeFunction::from_coeffs(self.fine.clone(), self.apply_raw(u.coeffs()))
    }
}

/// Coarse cell index and offset (in fine cells) of fine grid line `f`.
fn split(f: usize, r: usize, n_coarse: usize) -> (usize, usize) {
    let c = f / r;
    if c == n_coarse {
        (c - 1, r)
    } else {
        (c, f % r)
    }
}

/// Embeds `u` into the nested fine space.
pub fn prolong(u: &FeFunction, fine: &Arc<DofMap>) -> Result<FeFunction> {
    Prolongation::new(u.dofmap(), fine)?.apply(u)
}
