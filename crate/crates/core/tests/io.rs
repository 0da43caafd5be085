use bh_core::cell::{solve_cell_functions, CellProblem, Compatibility, Material, TimeGrid};
use bh_core::geometry::{build_membrane_cell, build_unit_cell, GeometrySpec};
use bh_core::io::{
    self, read_cell_archive, read_mesh, read_solution, read_tensors, write_cell_archive, write_mesh, write_solution,
    write_tensors, CellArchive, Header, Manifest, SolutionArchive,
};
use bh_core::tensors::EffectiveTensors;
use bh_core::{BhError, Exec};

fn header() -> Header {
    let mut h = Header::new();
    h.insert("config_hash".into(), "abc".into());
    h.insert("geometry".into(), "disk2d r0=0.25".into());
    h
}

#[test]
fn mesh_roundtrip_is_exact() {
    for spec in [
        GeometrySpec::disk(0.25, 0.08),
        GeometrySpec::layered(0.25, 0.75, 0.1),
        GeometrySpec::tube(0.25, 0.25),
    ] {
        let (cell, _) = build_unit_cell(&spec).unwrap();
        let text = write_mesh(&cell.mesh, &header());
        assert!(text.starts_with("BHMESH 1\n# config_hash abc\n"));
        let (back, h) = read_mesh(&text).unwrap();
        assert_eq!(back, cell.mesh, "{spec:?}");
        assert_eq!(h, header());
        assert_eq!(write_mesh(&back, &h), text);
    }
    let mc = build_membrane_cell(&GeometrySpec::disk(0.25, 0.08), 0.1).unwrap();
    assert_eq!(read_mesh(&write_mesh(&mc.mesh, &Header::new())).unwrap().0, mc.mesh);
}

#[test]
fn malformed_mesh_is_a_parse_error() {
    let (cell, _) = build_unit_cell(&GeometrySpec::layered(0.25, 0.75, 0.125)).unwrap();
    let text = write_mesh(&cell.mesh, &Header::new());
    let cases = [
        text.replacen("BHMESH 1", "BHMESH 2", 1),
        text.replacen(" int", " solid", 1),
        text.replace("end\n", ""),
        text.replacen("elements", "elemnts", 1),
        String::new(),
    ];
    for bad in cases {
        assert!(matches!(read_mesh(&bad), Err(BhError::Parse { format: "BHMESH", .. })));
    }
}

fn disk_problem_outputs() -> (CellArchive, EffectiveTensors) {
    let (cell, surf) = build_unit_cell(&GeometrySpec::disk(0.25, 0.08)).unwrap();
    let p = CellProblem::new(&cell, &surf, Material::new(1.0, 3.0, 1.0), Exec::Parallel).unwrap();
    let set = solve_cell_functions(&p, TimeGrid::new(0.1, 0.025), Compatibility::Strict).unwrap();
    let tilde = p.solve_chi0_tilde().unwrap();
    let archive = CellArchive::from_functions(&p, &set, &tilde);

    // Tensors from the archive equal tensors from the live solve.
    let (set2, tilde2) = archive.to_functions(&p);
    let direct = EffectiveTensors::compute(&p, &set, &tilde).unwrap();
    let via = EffectiveTensors::compute(&p, &set2, &tilde2).unwrap();
    assert_eq!(direct, via);
    (archive, direct)
}

#[test]
fn cell_archive_and_tensor_report_roundtrip() {
    let (archive, t) = disk_problem_outputs();
    let text = write_cell_archive(&archive, &header());
    let (back, h) = read_cell_archive(&text).unwrap();
    assert_eq!(back, archive);
    assert_eq!(h, header());

    let text = write_tensors(&t, &header());
    assert!(text.contains("\nt,B11,B12,B21,B22,discrepancy\n"));
    assert!(text.contains("\nt,F11,F12,F21,F22,discrepancy\n"));
    assert!(text.contains("\neigenvalues lambda0I+A0 "));
    let (back, _) = read_tensors(&text).unwrap();
    assert_eq!(back, t);

    let truncated: String = text.lines().take(30).map(|l| format!("{l}\n")).collect();
    assert!(read_tensors(&truncated).is_err());
}

#[test]
fn solution_archive_roundtrip_and_summary() {
    let a = SolutionArchive {
        dim: 2,
        mesh: "unit_box 2 1".into(),
        times: vec![0.0, 0.1, 0.2],
        values: vec![vec![0.0, -0.0, 1e-300, f64::MAX], vec![1.0 / 3.0; 4], vec![-2.5e-7; 4]],
    };
    let text = write_solution(&a, &header());
    let (back, _) = read_solution(&text).unwrap();
    assert_eq!(back, a);
    assert!(back.values[0][1].is_sign_negative());

    let csv = io::solution_summary_csv(&a.times, &[1.0, 0.5, 0.25], &[2.0, 1.0, 0.5], &Header::new());
    assert_eq!(csv.lines().next(), Some("t,L2_norm,energy_norm"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn manifest_roundtrip_and_hash_check() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "alpha").unwrap();
    let m = Manifest {
        command: "mesh".into(),
        tool_version: "bh 0.1.0".into(),
        config_hash: "c0ffee".into(),
        started_unix: 1,
        wall_time_s: 0.25,
        inputs: vec![],
        outputs: vec![("a.txt".into(), io::sha256_hex(b"alpha"))],
    };
    assert_eq!(Manifest::parse(&m.render()).unwrap(), m);
    m.verify_outputs(dir.path()).unwrap();
    std::fs::write(dir.path().join("a.txt"), "alpha!").unwrap();
    assert!(matches!(m.verify_outputs(dir.path()), Err(BhError::MissingArtifact(_))));
    std::fs::remove_file(dir.path().join("a.txt")).unwrap();
    assert!(matches!(m.verify_outputs(dir.path()), Err(BhError::MissingArtifact(_))));
}

#[test]
fn sha256_matches_known_digest() {
    assert_eq!(
        io::sha256_hex(b"abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}

#[test]
fn vtk_export_lists_every_cell() {
    let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, 0.1)).unwrap();
    let u: Vec<f64> = cell.mesh.vertices.iter().map(|x| x[0]).collect();
    let text = io::vtk::write_vtk(&cell.mesh, "t", &[("u", &u)]);
    let ne = cell.mesh.n_elements();
    assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(text.contains(&format!("CELLS {ne} {}\n", 4 * ne)));
    assert!(text.contains(&format!("POINT_DATA {}\n", cell.mesh.n_vertices())));
    assert_eq!(text.lines().filter(|l| *l == "5").count(), ne);
}
