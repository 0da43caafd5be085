use std::f64::consts::PI;

use bh_core::geometry::{build_membrane_cell, build_unit_cell, tile_micro_domain, GeometrySpec, Phase};
use bh_core::BhError;

#[test]
fn disk_inclusion_area_and_interface() {
    let (cell, surf) = build_unit_cell(&GeometrySpec::disk(0.25, 0.02)).unwrap();
    assert!((cell.inclusion_volume() - PI / 16.0).abs() < 1e-3);
    assert!((cell.mesh.total_volume() - 1.0).abs() < 1e-12);
    assert_eq!(surf.n_components, 1);
    assert!((surf.total_measure() - 2.0 * PI * 0.25).abs() < 1e-2);
    assert!(surf.normals_consistent(&cell.mesh));
}

#[test]
fn disk_area_converges_at_second_order() {
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, h)).unwrap();
            (cell.inclusion_volume() - PI / 16.0).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio} from {errs:?}");
    }
}

#[test]
fn layered_cell_is_exact() {
    let (cell, surf) = build_unit_cell(&GeometrySpec::layered(0.25, 0.75, 0.05)).unwrap();
    assert!((cell.inclusion_volume() - 0.5).abs() < 1e-14);
    assert_eq!(surf.n_components, 2);
    assert!((surf.total_measure() - 2.0).abs() < 1e-14);
    assert!(surf.normals_consistent(&cell.mesh));
}

#[test]
fn periodic_partners_differ_by_unit_vectors() {
    for spec in [
        GeometrySpec::disk(0.3, 0.05),
        GeometrySpec::layered(0.2, 0.7, 0.1),
        GeometrySpec::tube(0.25, 0.125),
    ] {
        let (cell, _) = build_unit_cell(&spec).unwrap();
        assert!(!cell.mesh.periodic.is_empty());
        for pair in &cell.mesh.periodic {
            let (p, q) = (cell.mesh.vertices[pair.p], cell.mesh.vertices[pair.q]);
            for d in 0..3 {
                let expect = if d == pair.axis { 1.0 } else { 0.0 };
                assert_eq!(q[d] - p[d], expect);
            }
        }
    }
}

#[test]
fn tube_lattice_is_connected() {
    let (cell, surf) = build_unit_cell(&GeometrySpec::tube(0.25, 0.125)).unwrap();
    assert!((cell.mesh.total_volume() - 1.0).abs() < 1e-12);
    assert_eq!(surf.n_components, 1);
    assert!(surf.normals_consistent(&cell.mesh));
    // inclusion-exclusion: three cylinders, three bicylinders, one tricylinder
    let rho: f64 = 0.25;
    let exact = 3.0 * PI * rho * rho - 16.0 * rho.powi(3) + 8.0 * (2.0 - 2.0f64.sqrt()) * rho.powi(3);
    assert!(
        (cell.inclusion_volume() - exact).abs() < 0.02,
        "{}",
        cell.inclusion_volume()
    );
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(matches!(
        build_unit_cell(&GeometrySpec::disk(0.6, 0.02)),
        Err(BhError::InvalidGeometry(_))
    ));
    assert!(matches!(
        build_membrane_cell(&GeometrySpec::disk(0.25, 0.02), 0.0),
        Err(BhError::InvalidGeometry(_))
    ));
}

#[test]
fn membrane_annulus() {
    let m = build_membrane_cell(&GeometrySpec::disk(0.25, 0.02), 0.1).unwrap();
    let band = m.mesh.phase_volume(Phase::Membrane);
    let exact = PI * (0.3f64.powi(2) - 0.2f64.powi(2));
    assert!((band - exact).abs() < 0.02 * exact);
    assert!((band - 0.1 * 2.0 * PI * 0.25).abs() < 0.1 * exact);
    let thin = build_membrane_cell(&GeometrySpec::disk(0.25, 0.02), 0.05).unwrap();
    assert_eq!(thin.mesh.n_components(), 2);
}

#[test]
fn tiling_strips_boundary_inclusions() {
    let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, 0.05)).unwrap();
    let half = tile_micro_domain(&cell, 0.5).unwrap();
    assert_eq!(half.n_cells(), 4);
    assert_eq!(half.n_inclusion_cells(), 0);
    let quarter = tile_micro_domain(&cell, 0.25).unwrap();
    assert_eq!(quarter.n_inclusion_cells(), 4);
    assert_eq!(quarter.surf.n_components, 4);
    let expect_vertices = 16 * cell.mesh.n_vertices();
    assert!(quarter.mesh.n_vertices() < expect_vertices);
    assert!((quarter.mesh.total_volume() - 1.0).abs() < 1e-12);
    assert!(matches!(
        tile_micro_domain(&cell, 0.3),
        Err(BhError::NonIntegerTiling(_))
    ));
}
