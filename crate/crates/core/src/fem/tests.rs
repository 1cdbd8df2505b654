use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::mesh::{Mesh, Rect};

fn disc(n: usize) -> Discretization {
    Discretization::from_mesh(Mesh::square(n).unwrap(), 1.0, 1.0).unwrap()
}

fn disc_lm(n: usize, lambda: f64, mu: f64) -> Discretization {
    Discretization::from_mesh(Mesh::square(n).unwrap(), lambda, mu).unwrap()
}

fn to_na(m: &SparseMatrix) -> DMatrix<f64> {
    let n = m.n();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in m.row(i) {
            d[(i, j)] = v;
        }
    }
    d
}

fn order(errors: &[f64]) -> f64 {
    let k = errors.len();
    (errors[k - 2] / errors[k - 1]).log2()
}

fn rotation(p: Point) -> [f64; 2] {
    [-p[1], p[0]]
}

#[test]
fn dof_map_is_a_bijection_with_boundary_constraints() {
    let mesh = Arc::new(Mesh::square(3).unwrap());
    let dm = DofMap::new(mesh.clone());
    assert_eq!(dm.n_dofs(), 2 * mesh.n_vertices());
    let mut seen = vec![false; dm.n_dofs()];
    for v in 0..mesh.n_vertices() {
        for c in 0..2 {
            let d = DofMap::dof(v, c);
            assert!(!seen[d]);
            seen[d] = true;
            assert_eq!(DofMap::vertex_component(d), (v, c));
            assert_eq!(dm.constrained_mask()[d], mesh.is_boundary(v));
        }
    }
    assert_eq!(dm.constrained_dofs().len(), 2 * mesh.boundary_vertices().len());
}

#[test]
fn mass_component_blocks_integrate_to_area() {
    let d = disc(5);
    let mut sums = [0.0; 2];
    for i in 0..d.n_dofs() {
        for (j, v) in d.mass().row(i) {
            assert_eq!(i % 2, j % 2, "mass must not couple components");
            sums[i % 2] += v;
        }
    }
    for s in sums {
        assert!((s - 4.0).abs() < 1e-12);
    }
    let c = interpolate_nodal(&|_: Point| [3.0, -2.0], d.dofmap()).unwrap();
    assert!((d.mass().quad_form(c.coeffs()) - 4.0 * 13.0).abs() < 1e-12);
}

#[test]
fn single_cell_mass_matches_hand_integration() {
    // Vertices 0:(-1,-1) 1:(1,-1) 2:(-1,1) 3:(1,1); triangles (0,1,3) and
    // (0,3,2), each of area 2, so the element matrix is (1/6)[[2,1,1],...].
    let d = disc(1);
    let hand = [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0],
        [1.0 / 6.0, 1.0 / 3.0, 0.0, 1.0 / 6.0],
        [1.0 / 6.0, 0.0, 1.0 / 3.0, 1.0 / 6.0],
        [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..2 {
                let got = d.mass().get(DofMap::dof(a, c), DofMap::dof(b, c));
                assert!((got - hand[a][b]).abs() < 1e-15, "({a},{b}) {got}");
                assert_eq!(d.mass().get(DofMap::dof(a, c), DofMap::dof(b, 1 - c)), 0.0);
            }
        }
    }
}

#[test]
fn rigid_motions_are_in_the_elasticity_kernel() {
    let d = disc_lm(4, 2.0, 0.7);
    for f in [
        &(|_: Point| [1.0, 0.0]) as &dyn VectorField,
        &|_: Point| [0.0, 1.0],
        &rotation,
    ] {
        let u = interpolate_nodal(f, d.dofmap()).unwrap();
        let r = d.stiffness().mul_vec(u.coeffs());
        assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
    }
}

#[test]
fn uniaxial_stretch_energy_on_one_cell() {
    for (lambda, mu) in [(1.0, 1.0), (0.0, 2.0), (3.0, 0.5)] {
        let d = disc_lm(1, lambda, mu);
        let u = interpolate_nodal(&|p: Point| [p[0], 0.0], d.dofmap()).unwrap();
        let e = d.stiffness().quad_form(u.coeffs());
        assert!((e - (4.0 * lambda + 4.0 * mu)).abs() < 1e-12, "{e}");
    }
}

#[test]
fn nonpositive_shear_modulus_is_rejected() {
    let dm = DofMap::new(Arc::new(Mesh::square(2).unwrap()));
    assert!(matches!(assemble_elasticity(&dm, 1.0, 0.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(assemble_elasticity(&dm, -1.0, 1.0), Err(Error::InvalidArgument(_))));
    assert!(Discretization::from_mesh(Mesh::square(2).unwrap(), 1.0, -1.0).is_err());
}

#[test]
fn eliminated_matrices_are_spd_by_dense_eigenvalues() {
    let d = disc_lm(2, 1.0, 1.0);
    for m in [d.stiffness_dir(), d.mass_dir(), d.mass()] {
        let eig = to_na(m).symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > 1e-10), "{eig}");
    }
    let full = to_na(d.stiffness()).symmetric_eigenvalues();
    assert!(full.iter().all(|&l| l > -1e-12));
    assert!(full.iter().filter(|l| l.abs() < 1e-10).count() >= 3);
}

#[test]
fn elimination_solve_returns_zero_on_constrained_dofs() {
    let d = disc(3);
    let mut b: Vec<f64> = (0..d.n_dofs()).map(|i| (i as f64).sin()).collect();
    d.dofmap().zero_constrained(&mut b);
    let x = d.stiffness_dir_solver().unwrap().solve(&b).unwrap();
    for &c in d.dofmap().constrained_dofs() {
        assert_eq!(x[c], 0.0);
    }
}

#[test]
fn nodal_interpolation() {
    let d = disc(4);
    let z = interpolate_nodal(&|_: Point| [0.0, 0.0], d.dofmap()).unwrap();
    assert!(z.coeffs().iter().all(|&x| x == 0.0));
    let lin = |p: Point| [1.0 + 2.0 * p[0] - p[1], 0.5 * p[1] - 3.0 * p[0]];
    let u = interpolate_nodal(&lin, d.dofmap()).unwrap();
    assert!(l2_error_against(&u, &lin) <= 1e-14);
    let err = interpolate_nodal(&|p: Point| [if p[0] > 0.9 { f64::NAN } else { 0.0 }, 0.0], d.dofmap());
    match err {
        Err(Error::Evaluation { x, .. }) => assert_eq!(x, 1.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn interpolation_error_is_second_order() {
    let f = |p: Point| [(PI * p[0]).sin(), 0.0];
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| l2_error_against(&interpolate_nodal(&f, disc(n).dofmap()).unwrap(), &f))
        .collect();
    let r = order(&errs);
    assert!((r - 2.0).abs() <= 0.1, "{errs:?} order {r}");
}

#[test]
fn l2_projection_reproduces_p1_and_constants() {
    let d = disc(4);
    let c = d.l2_project(L2Source::Field(&|_: Point| [1.5, -0.25])).unwrap();
    for v in 0..d.mesh().n_vertices() {
        let val = c.at_vertex(v);
        assert!((val[0] - 1.5).abs() < 1e-10 && (val[1] + 0.25).abs() < 1e-10);
    }
    let coeffs: Vec<f64> = (0..d.n_dofs()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let u = d.function(coeffs).unwrap();
    let coarse = disc(2);
    // A P1 function on the mesh, given as a fine-mesh function of itself.
    let p = d.l2_project(L2Source::Fine(&u)).unwrap();
    for (a, b) in p.coeffs().iter().zip(u.coeffs()) {
        assert!((a - b).abs() < 1e-10);
    }
    let pc = coarse.l2_project(L2Source::Fine(&u)).unwrap();
    let ppc = coarse.l2_project(L2Source::Fine(&pc)).unwrap();
    for (a, b) in pc.coeffs().iter().zip(ppc.coeffs()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn l2_projection_error_is_second_order() {
    let f = |p: Point| [p[0] * p[0], 0.0];
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let d = disc(n);
            l2_error_against(&d.l2_project(L2Source::Field(&f)).unwrap(), &f)
        })
        .collect();
    let r = order(&errs);
    assert!((r - 2.0).abs() <= 0.1, "{errs:?} order {r}");
}

fn bump() -> WithJacobian<impl Fn(Point) -> [f64; 2] + Sync, impl Fn(Point) -> [[f64; 2]; 2] + Sync> {
    WithJacobian {
        value: |p: Point| [(PI * p[0]).sin() * (PI * p[1]).sin(), 0.0],
        jacobian: |p: Point| {
            [
                [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()],
                [0.0, 0.0],
            ]
        },
    }
}

#[test]
fn elasticity_projection_energy_error_is_first_order() {
    let w = bump();
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let d = disc(n);
            h1_semi_error_against(&d.elasticity_project(RitzSource::Field(&w)).unwrap(), &w)
        })
        .collect();
    let r = order(&errs);
    assert!((r - 1.0).abs() <= 0.1, "{errs:?} order {r}");
}

#[test]
fn elasticity_projection_is_idempotent_and_checks_boundary() {
    let d = disc_lm(4, 2.0, 0.5);
    let z = d
        .elasticity_project(RitzSource::Field(&WithJacobian {
            value: |_: Point| [0.0, 0.0],
            jacobian: |_: Point| [[0.0; 2]; 2],
        }))
        .unwrap();
    assert!(z.coeffs().iter().all(|&x| x == 0.0));

    let r1 = d.elasticity_project(RitzSource::Field(&bump())).unwrap();
    let r2 = d.elasticity_project(RitzSource::Fine(&r1)).unwrap();
    for (a, b) in r1.coeffs().iter().zip(r2.coeffs()) {
        assert!((a - b).abs() < 1e-10);
    }
    let coarse = disc_lm(2, 2.0, 0.5);
    let rc = coarse.elasticity_project(RitzSource::Fine(&r1)).unwrap();
    let rcc = coarse.elasticity_project(RitzSource::Fine(&rc)).unwrap();
    for (a, b) in rc.coeffs().iter().zip(rcc.coeffs()) {
        assert!((a - b).abs() < 1e-10);
    }

    let bad = WithJacobian {
        value: |_: Point| [1.0, 0.0],
        jacobian: |_: Point| [[0.0; 2]; 2],
    };
    assert!(matches!(d.elasticity_project(RitzSource::Field(&bad)), Err(Error::InvalidArgument(_))));
    let c = interpolate_nodal(&|_: Point| [1.0, 0.0], d.dofmap()).unwrap();
    assert!(d.elasticity_project(RitzSource::Fine(&c)).is_err());
}

#[test]
fn discrete_operator_annihilates_rigid_motion() {
    let d = disc(4);
    let u = interpolate_nodal(&rotation, d.dofmap()).unwrap();
    let l = d.discrete_l(&u).unwrap();
    assert!(l.coeffs().iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn discrete_operator_defining_identity() {
    let d = disc_lm(4, 1.5, 0.8);
    let w = interpolate_nodal(&|p: Point| [(p[0] * 2.0).sin() * p[1], p[0] * p[0] - p[1]], d.dofmap()).unwrap();
    let l = d.discrete_l(&w).unwrap();
    let mut r = d.mass().mul_vec(l.coeffs());
    d.stiffness().mul_vec_add(1.0, w.coeffs(), &mut r);
    let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn discrete_operator_matches_dense_oracle() {
    let d = disc_lm(2, 1.3, 0.6);
    let w: Vec<f64> = (0..d.n_dofs()).map(|i| ((i as f64) * 0.37).cos()).collect();
    let m = to_na(d.mass());
    let a = to_na(d.stiffness());
    let rhs = -(a * DVector::from_vec(w.clone()));
    let want = m.lu().solve(&rhs).unwrap();
    let got = d.discrete_l(&d.function(w).unwrap()).unwrap();
    for (g, e) in got.coeffs().iter().zip(want.iter()) {
        assert!((g - e).abs() <= 1e-10, "{g} vs {e}");
    }
}

#[test]
fn constrained_discrete_operator_identity_on_interior_tests() {
    let d = disc(4);
    let w = d.elasticity_project(RitzSource::Field(&bump())).unwrap();
    let l = d.discrete_l_constrained(&w).unwrap();
    assert!(l.is_boundary_compliant());
    let mut r = d.mass().mul_vec(l.coeffs());
    d.stiffness().mul_vec_add(1.0, w.coeffs(), &mut r);
    d.dofmap().zero_constrained(&mut r);
    assert!(r.iter().all(|x| x.abs() <= 1e-10));
}

#[test]
fn norms_of_simple_fields() {
    let d = disc(4);
    for k in [NormKind::L2, NormKind::H1Semi, NormKind::Div, NormKind::Eps] {
        assert_eq!(d.norm(&d.zeros(), k), 0.0);
    }
    let one = interpolate_nodal(&|_: Point| [1.0, 0.0], d.dofmap()).unwrap();
    assert!((d.norm(&one, NormKind::L2) - 2.0).abs() < 1e-12);
    let x = interpolate_nodal(&|p: Point| [p[0], 0.0], d.dofmap()).unwrap();
    assert!((d.norm(&x, NormKind::Div).powi(2) - 4.0).abs() < 1e-12);
    assert!((d.norm(&x, NormKind::Eps).powi(2) - 4.0).abs() < 1e-12);
    assert!((d.norm(&x, NormKind::H1Semi).powi(2) - 4.0).abs() < 1e-12);
    // ∇(−y, x) = [[0,−1],[1,0]]: |∇u|² = 2, strain and divergence vanish.
    let r = interpolate_nodal(&rotation, d.dofmap()).unwrap();
    assert!((d.norm(&r, NormKind::H1Semi).powi(2) - 8.0).abs() < 1e-12);
    assert!(d.norm(&r, NormKind::Eps) < 1e-7);
}

#[test]
fn prolongation_embeds_p1_functions() {
    let coarse = disc(2);
    let fine = disc(8);
    let lin = |p: Point| [0.3 - p[0] + 2.0 * p[1], 4.0 * p[0]];
    let u = interpolate_nodal(&lin, coarse.dofmap()).unwrap();
    let pu = prolong(&u, fine.dofmap()).unwrap();
    for (v, &p) in fine.mesh().vertices().iter().enumerate() {
        let want = lin(p);
        let got = pu.at_vertex(v);
        assert!((got[0] - want[0]).abs() < 1e-14 && (got[1] - want[1]).abs() < 1e-14);
    }
    let c = interpolate_nodal(&|_: Point| [2.0, -1.0], coarse.dofmap()).unwrap();
    let pc = prolong(&c, fine.dofmap()).unwrap();
    assert!(pc.coeffs().chunks(2).all(|x| x == [2.0, -1.0]));

    let other = disc(3);
    assert!(matches!(prolong(&u, other.dofmap()), Err(Error::InvalidArgument(_))));
    let shifted = Discretization::from_mesh(Mesh::rect(Rect::new(0.0, 2.0, -1.0, 1.0), 8, 8).unwrap(), 1.0, 1.0).unwrap();
    assert!(prolong(&u, shifted.dofmap()).is_err());
}

#[test]
fn one_level_prolongation_averages_edge_midpoints() {
    let coarse = disc(2);
    let fine = disc(4);
    let coeffs: Vec<f64> = (0..coarse.n_dofs()).map(|i| (i as f64 * 1.7).sin()).collect();
    let u = coarse.function(coeffs).unwrap();
    let pu = prolong(&u, fine.dofmap()).unwrap();
    let cm = coarse.mesh();
    let fm = fine.mesh();
    for j in 0..=4 {
        for i in 0..=4 {
            let got = pu.at_vertex(fm.vertex_index(i, j));
            let want = match (i % 2, j % 2) {
                (0, 0) => u.at_vertex(cm.vertex_index(i / 2, j / 2)),
                // Midpoints lie on the edges horizontal, vertical or diagonal.
                (1, 0) => avg(u.at_vertex(cm.vertex_index(i / 2, j / 2)), u.at_vertex(cm.vertex_index(i / 2 + 1, j / 2))),
                (0, 1) => avg(u.at_vertex(cm.vertex_index(i / 2, j / 2)), u.at_vertex(cm.vertex_index(i / 2, j / 2 + 1))),
                _ => avg(u.at_vertex(cm.vertex_index(i / 2, j / 2)), u.at_vertex(cm.vertex_index(i / 2 + 1, j / 2 + 1))),
            };
            assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
        }
    }
}

fn avg(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mass_is_positive_definite(x in prop::collection::vec(-1.0f64..1.0, 50)) {
        let d = disc(4);
        prop_assume!(x.iter().any(|v| *v != 0.0));
        prop_assert!(d.mass().quad_form(&x) > 0.0);
    }

    #[test]
    fn stiffness_is_psd_and_kernel_contains_rigid_motions(
        x in prop::collection::vec(-1.0f64..1.0, 32),
        lambda in 0.0f64..5.0,
        mu in 0.1f64..5.0,
        c in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let d = disc_lm(3, lambda, mu);
        prop_assert!(d.stiffness().quad_form(&x) >= -1e-12);
        let rigid = interpolate_nodal(&|p: Point| [c[0] - c[2] * p[1], c[1] + c[2] * p[0]], d.dofmap()).unwrap();
        let r = d.stiffness().mul_vec(rigid.coeffs());
        prop_assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn discrete_operator_consistency(
        w in prop::collection::vec(-1.0f64..1.0, 50),
        v in prop::collection::vec(-1.0f64..1.0, 50),
    ) {
        let d = disc(4);
        let l = d.discrete_l(&d.function(w.clone()).unwrap()).unwrap();
        let lhs = d.mass().bilinear(l.coeffs(), &v) + d.energy_form(&w, &v);
        let scale = d.norm_raw(&w, NormKind::L2).max(1e-300) * d.norm_raw(&v, NormKind::L2).max(1e-300);
        prop_assert!(lhs.abs() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn projections_are_idempotent(w in prop::collection::vec(-1.0f64..1.0, 50)) {
        let d = disc(4);
        let mut u = d.function(w).unwrap();
        let p = d.l2_project(L2Source::Fine(&u)).unwrap();
        for (a, b) in p.coeffs().iter().zip(u.coeffs()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        u.zero_boundary();
        let r = d.elasticity_project(RitzSource::Fine(&u)).unwrap();
        for (a, b) in r.coeffs().iter().zip(u.coeffs()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn prolongation_preserves_norms(w in prop::collection::vec(-1.0f64..1.0, 18)) {
        let coarse = disc(2);
        let fine = disc(8);
        let u = coarse.function(w).unwrap();
        let pu = prolong(&u, fine.dofmap()).unwrap();
        for k in [NormKind::L2, NormKind::H1Semi, NormKind::Div, NormKind::Eps] {
            let (a, b) = (coarse.norm(&u, k), fine.norm(&pu, k));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{:?}: {} vs {}", k, a, b);
        }
    }
}
