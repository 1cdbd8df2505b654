//! Direct sampling of the Gaussian per-step functionals of the subgrid path.
//!
//! Within one step, with `B(0) = 0`, points `ℓδ` (`δ = τ³`, `ℓ = 0..K`) and
//! strides `sⱼ = 8ʲ`, the vector `(B(Kδ), S₀, S₁, …)` with
//! `Sⱼ = Σ_{m < K/sⱼ} B(m sⱼ δ)` is Gaussian with covariance built from
//! `Cov(B(a), B(b)) = min(a, b)`. It is sampled through its Cholesky factor,
//! whose leading block does not depend on how many levels follow, so a single
//! level and a ladder draw identical `(ΔW̄, S₀)` from the same normals.

use crate::error::{invalid, Result};

use super::{FineStep, IncrementSet, NoiseConfig, NormalSource};

/// Lower Cholesky factor of the covariance of `(B(Kδ), S₀, …, S_{L−1})`.
pub(crate) fn factor(k: u64, delta: f64, levels: usize) -> Vec<Vec<f64>> {
    let dim = levels + 1;
    let stride = |j: usize| 1u64 << (3 * j);
    let count = |j: usize| k / stride(j);
    let mut cov = vec![vec![0.0; dim]; dim];
    cov[0][0] = k as f64;
    for i in 0..levels {
        let (s, m) = (stride(i) as f64, count(i) as f64);
        cov[0][i + 1] = s * m * (m - 1.0) / 2.0;
        for j in i..levels {
            // Points of level j are a subset of those of level i.
            let mut acc = 0.0;
            for q in 0..count(j) {
                let p = q * stride(j);
                let c = p / stride(i);
                let below = stride(i) as f64 * (c as f64) * (c as f64 + 1.0) / 2.0;
                let above = (count(i) - c - 1) as f64 * p as f64;
                acc += below + above;
            }
            cov[i + 1][j + 1] = acc;
        }
    }
    let mut l = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            let a = cov[j][i];
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                let d = a - s;
                l[i][i] = if d > 0.0 { d.sqrt() } else { 0.0 };
            } else if l[j][j] > 0.0 {
                l[i][j] = (a - s) / l[j][j];
            }
        }
    }
    let scale = delta.sqrt();
    for row in &mut l {
        row.iter_mut().for_each(|x| *x *= scale);
    }
    l
}

fn draw(l: &[Vec<f64>], src: &mut dyn NormalSource, z: &mut [f64], out: &mut [f64]) {
    for zi in z.iter_mut() {
        *zi = src.next_normal();
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..=i).map(|p| l[i][p] * z[p]).sum();
    }
}

pub(crate) fn sample(cfg: &NoiseConfig, src: &mut dyn NormalSource) -> Result<IncrementSet> {
    let l = factor(cfg.step.subcount(), cfg.step.substep(), 1);
    let (mut z, mut v) = ([0.0; 2], [0.0; 2]);
    let mut bar = Vec::with_capacity(cfg.steps);
    let mut sums = Vec::with_capacity(cfg.steps);
    for n in 0..cfg.steps {
        src.seek_step(n as u64);
        draw(&l, src, &mut z, &mut v);
        bar.push(v[0]);
        sums.push(v[1]);
    }
    Ok(IncrementSet::from_parts(cfg.step, bar, &sums))
}

pub(crate) fn ladder_level_sums(base: &NoiseConfig, levels: usize, src: &mut dyn NormalSource) -> Result<Vec<FineStep>> {
    let k = base.step.subcount();
    let coarsest_stride = 1u64 << (3 * (levels - 1));
    if k % coarsest_stride != 0 {
        return Err(invalid(format!(
            "exact sampler cannot couple {levels} levels below step {}: τ⁻² = {k} is not a multiple of {coarsest_stride}; use the subgrid sampler",
            base.step
        )));
    }
    let l = factor(k, base.step.substep(), levels);
    let mut z = vec![0.0; levels + 1];
    let mut v = vec![0.0; levels + 1];
    let mut out = Vec::with_capacity(base.steps);
    for n in 0..base.steps {
        src.seek_step(n as u64);
        draw(&l, src, &mut z, &mut v);
        out.push(FineStep {
            bar: v[0],
            sums: v[1..].to_vec(),
        });
    }
    Ok(out)
}
