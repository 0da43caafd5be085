#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use bh_core::fem::assemble::{facet_projected_gradients, facet_tangential_gradients, volume_weights};
use bh_core::fem::{
    assemble_bulk_stiffness, assemble_surface_stiffness, mass_matrix, surface_flux_jump, Coeffs, Csr, DofMap,
    MeanZeroSolver,
};
use bh_core::geometry::{build_unit_cell, GeometrySpec, Mesh, Phase};
use bh_core::{BhError, Exec};

fn unit_triangle() -> Mesh {
    Mesh::new(
        2,
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        vec![[0, 1, 2, usize::MAX]],
        vec![Phase::Out],
    )
}

#[test]
fn reference_triangle_stiffness() {
    let m = unit_triangle();
    let k = assemble_bulk_stiffness(&m, &DofMap::identity(3), &Coeffs::uniform(1.0), Exec::Serial).unwrap();
    let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((k.get(i, j) - expect[i][j]).abs() < 1e-15);
        }
    }
    let k2 = assemble_bulk_stiffness(&m, &DofMap::identity(3), &Coeffs::uniform(2.0), Exec::Serial).unwrap();
    assert_eq!(k2, k.scaled(2.0));
    assert!(matches!(
        assemble_bulk_stiffness(&m, &DofMap::identity(3), &Coeffs::two_phase(1.0, -1.0), Exec::Serial),
        Err(BhError::NonpositiveCoefficient { .. })
    ));
}

#[test]
fn quadratic_form_of_coordinate_is_lambda0() {
    let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, 0.02)).unwrap();
    let m = &cell.mesh;
    let dofs = DofMap::identity(m.n_vertices());
    let c = Coeffs::two_phase(1.0, 2.0);
    let k = assemble_bulk_stiffness(m, &dofs, &c, Exec::Parallel).unwrap();
    let y1: Vec<f64> = m.vertices.iter().map(|p| p[0]).collect();
    let lambda0 = m.phase_volume(Phase::Int) + 2.0 * m.phase_volume(Phase::Out);
    assert!((k.form(&y1, &y1) - lambda0).abs() < 1e-12);
    assert!((lambda0 - (PI / 16.0 + 2.0 * (1.0 - PI / 16.0))).abs() < 2e-3);
}

#[test]
fn periodic_operators_are_symmetric_with_constant_kernel() {
    for spec in [
        GeometrySpec::disk(0.25, 0.04),
        GeometrySpec::layered(0.25, 0.75, 0.05),
        GeometrySpec::tube(0.25, 0.125),
    ] {
        let (cell, surf) = build_unit_cell(&spec).unwrap();
        let dofs = DofMap::periodic(&cell.mesh);
        let k = assemble_bulk_stiffness(&cell.mesh, &dofs, &Coeffs::two_phase(1.0, 3.0), Exec::Parallel).unwrap();
        let s = assemble_surface_stiffness(&cell.mesh, &surf, &dofs, Exec::Parallel).unwrap();
        for a in [&k, &s] {
            assert!(a.max_asymmetry() <= 1e-14 * a.max_abs());
            let one = vec![1.0; dofs.n_dofs];
            assert!(a.mul_vec(&one).iter().all(|v| v.abs() < 1e-12 * a.max_abs().max(1.0)));
        }
    }
}

#[test]
fn serial_and_parallel_assembly_are_identical() {
    let (cell, surf) = build_unit_cell(&GeometrySpec::tube(0.25, 0.125)).unwrap();
    let dofs = DofMap::periodic(&cell.mesh);
    let c = Coeffs::two_phase(1.0, 3.0);
    assert_eq!(
        assemble_bulk_stiffness(&cell.mesh, &dofs, &c, Exec::Serial).unwrap(),
        assemble_bulk_stiffness(&cell.mesh, &dofs, &c, Exec::Parallel).unwrap()
    );
    assert_eq!(
        assemble_surface_stiffness(&cell.mesh, &surf, &dofs, Exec::Serial).unwrap(),
        assemble_surface_stiffness(&cell.mesh, &surf, &dofs, Exec::Parallel).unwrap()
    );
}

#[test]
fn projected_and_intrinsic_tangential_gradients_agree() {
    for spec in [GeometrySpec::disk(0.25, 0.04), GeometrySpec::tube(0.25, 0.125)] {
        let (cell, surf) = build_unit_cell(&spec).unwrap();
        for f in 0..surf.n_facets() {
            let pts: Vec<_> = surf.facet(f).iter().map(|&v| cell.mesh.vertices[v]).collect();
            let (_, gi) = facet_tangential_gradients(cell.dim(), &pts);
            let gp = facet_projected_gradients(&cell.mesh, &surf, f);
            for k in 0..cell.dim() {
                for d in 0..3 {
                    let scale = gi[k].iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    assert!((gi[k][d] - gp[k][d]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}

#[test]
fn surface_stiffness_on_flat_chain_and_circle() {
    // flat layered interfaces: 1D P1 stiffness with segment lengths
    let (cell, surf) = build_unit_cell(&GeometrySpec::layered(0.25, 0.75, 0.1)).unwrap();
    let dofs = DofMap::periodic(&cell.mesh);
    let s = assemble_surface_stiffness(&cell.mesh, &surf, &dofs, Exec::Serial).unwrap();
    for f in 0..surf.n_facets() {
        let v = surf.facet(f);
        let (p, q) = (dofs.dof(v[0]), dofs.dof(v[1]));
        assert!(s.get(p, q) < 0.0);
    }
    let seg = surf.measures[0];
    let v = surf.facet(0);
    assert!((s.get(dofs.dof(v[0]), dofs.dof(v[1])) + 1.0 / seg).abs() < 1e-9);

    // circle: ∫_Γ |∇^B y₁|² = π r₀
    let r0 = 0.25;
    let mut errs = vec![];
    for h in [0.04, 0.02, 0.01] {
        let (cell, surf) = build_unit_cell(&GeometrySpec::disk(r0, h)).unwrap();
        let dofs = DofMap::identity(cell.mesh.n_vertices());
        let s = assemble_surface_stiffness(&cell.mesh, &surf, &dofs, Exec::Serial).unwrap();
        let y1: Vec<f64> = cell.mesh.vertices.iter().map(|p| p[0]).collect();
        errs.push((s.form(&y1, &y1) - PI * r0).abs());
    }
    assert!(errs[0] < 1e-2 && errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
}

#[test]
fn flux_jump_of_coordinate_field() {
    let (cell, surf) = build_unit_cell(&GeometrySpec::disk(0.25, 0.04)).unwrap();
    let dofs = DofMap::identity(cell.mesh.n_vertices());
    let y1: Vec<f64> = cell.mesh.vertices.iter().map(|p| p[0] + 2.0 * p[1]).collect();
    let equal = surface_flux_jump(&cell.mesh, &surf, &dofs, &y1, &Coeffs::uniform(1.0)).unwrap();
    assert!(equal.iter().all(|j| j.abs() < 1e-12));
    let x: Vec<f64> = cell.mesh.vertices.iter().map(|p| p[0]).collect();
    let jump = surface_flux_jump(&cell.mesh, &surf, &dofs, &x, &Coeffs::two_phase(1.0, 3.0)).unwrap();
    for f in 0..surf.n_facets() {
        assert!((jump[f] - 2.0 * surf.normals[f][0]).abs() < 1e-12);
    }
}

fn periodic_poisson_error(h: f64) -> f64 {
    let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, h)).unwrap();
    let m = &cell.mesh;
    let dofs = DofMap::periodic(m);
    let k = assemble_bulk_stiffness(m, &dofs, &Coeffs::uniform(1.0), Exec::Parallel).unwrap();
    let mass = mass_matrix(m, &dofs, Exec::Parallel);
    let w = volume_weights(m, &dofs);
    let exact = |v: usize| {
        let p = m.vertices[v];
        (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos()
    };
    let u = dofs.from_vertex_fn(exact);
    let f: Vec<f64> = u.iter().map(|v| 8.0 * PI * PI * v).collect();
    let b = mass.mul_vec(&f);
    let solver = MeanZeroSolver::new(&k, vec![0; dofs.n_dofs], w).unwrap();
    let (x, _) = solver.solve(&b).unwrap();
    let r: Vec<f64> = k.mul_vec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
    assert!(norm(&r) <= 1e-10 * norm(&b));
    let e: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a - b).collect();
    mass.form(&e, &e).sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn periodic_poisson_converges_at_second_order() {
    let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&h| periodic_poisson_error(h)).collect();
    for w in e.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..5.0).contains(&r), "{e:?}");
    }
}

#[test]
fn zero_rhs_gives_zero() {
    let k = Csr::from_triplets(2, vec![(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]);
    let (x, _) = MeanZeroSolver::new(&k, vec![0, 0], vec![0.5, 0.5])
        .unwrap()
        .solve(&[0.0, 0.0])
        .unwrap();
    assert_eq!(x, vec![0.0, 0.0]);
}
