use std::sync::Arc;

use bh_core::cell::{solve_cell_functions, CellProblem, Compatibility, Material, TimeGrid};
use bh_core::fem::{assemble_bulk_stiffness, DofMap, Method};
use bh_core::geometry::{build_unit_cell, tile_micro_domain, GeometrySpec};
use bh_core::micro::{convergence_study, MicroRun, Reference};
use bh_core::presets::Preset;
use bh_core::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn assembly(c: &mut Criterion) {
    let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, 0.01)).unwrap();
    let dofs = DofMap::periodic(&cell.mesh);
    let mat = Material::new(1.0, 3.0, 1.0);
    let mut g = c.benchmark_group("bulk_stiffness");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| assemble_bulk_stiffness(&cell.mesh, &dofs, &mat.coeffs(), exec).unwrap())
        });
    }
    g.finish();
}

fn cell_functions(c: &mut Criterion) {
    let (cell, surf) = build_unit_cell(&GeometrySpec::disk(0.25, 0.04)).unwrap();
    let mat = Material::new(1.0, 3.0, 1.0);
    let mut g = c.benchmark_group("cell_functions");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let p = CellProblem::new(&cell, &surf, mat, exec).unwrap();
                solve_cell_functions(&p, TimeGrid::new(0.5, 0.025), Compatibility::Strict).unwrap()
            })
        });
    }
    g.finish();
}

fn micro_sweep(c: &mut Criterion) {
    let (cell, _) = build_unit_cell(&GeometrySpec::disk(0.25, 0.08)).unwrap();
    let mat = Material::new(1.0, 3.0, 1.0);
    let mut g = c.benchmark_group("micro_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        let runs: Vec<MicroRun> = [0.5, 0.25]
            .iter()
            .map(|&eps| MicroRun {
                micro: Arc::new(tile_micro_domain(&cell, eps).unwrap()),
                material: mat,
                k: 2.0,
                source: Preset::SinProduct.into(),
                u0_bar: Preset::SinProduct.into(),
                t_final: 0.2,
                dt: 0.05,
                method: Method::Direct,
                exec,
            })
            .collect();
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| convergence_study("eps", &runs, Reference::Zero, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, assembly, cell_functions, micro_sweep);
criterion_main!(benches);
