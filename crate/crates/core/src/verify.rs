//! The invariant ledger behind `bh verify`.
//!
//! Every check records a measured value, the limit it is held to and the
//! verdict. The rendered ledger contains no timings, so repeated runs of the
//! same configuration produce identical bytes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::cell::{solve_cell_functions, CellProblem, Evolution};
use crate::config::RunConfig;
use crate::error::Result;
use crate::geometry::{build_membrane_cell, build_unit_cell, GeometryKind, Phase};
use crate::io::{self, CellArchive, Header};
use crate::macroscale::{self, Data, MacroCoefficients, MacroProblem};
use crate::micro::{self, MembraneRun, MicroRun, Reference};
use crate::par::Exec;
use crate::pipeline::{Pipeline, COMPATIBILITY_TOL};
use crate::presets::Preset;
use crate::tensors::{add_scaled_identity, asymmetry, max_entry, sym_eigenvalues, EffectiveTensors, Mat3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// value ≤ limit
    AtMost,
    /// value ≥ limit
    AtLeast,
    /// value is 1 (true) or 0 (false); limit unused
    Holds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub checks: Vec<Check>,
}

impl Ledger {
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, limit, Bound::AtMost, value <= limit, String::new());
    }

    fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, limit, Bound::AtLeast, value >= limit, String::new());
    }

    fn holds(&mut self, name: &str, ok: bool, detail: String) {
        self.push(name, f64::from(u8::from(ok)), 1.0, Bound::Holds, ok, detail);
    }

    fn push(&mut self, name: &str, value: f64, limit: f64, bound: Bound, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            limit,
            bound,
            pass,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self, config_hash: &str) -> String {
        let mut s = format!("# bh verify ledger\n# config_hash {config_hash}\n");
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = match c.bound {
                Bound::AtMost => write!(s, "{verdict} {:<34} {:>11.4e} <= {:.1e}", c.name, c.value, c.limit),
                Bound::AtLeast => write!(s, "{verdict} {:<34} {:>11.4e} >= {:.1e}", c.name, c.value, c.limit),
                Bound::Holds => write!(s, "{verdict} {:<34}", c.name),
            };
            if !c.detail.is_empty() {
                let _ = write!(s, "  {}", c.detail);
            }
            s.truncate(s.trim_end().len());
            s.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "# {} checks, {failed} failed", self.checks.len());
        s
    }
}

fn dissipation_defect(series: &[f64]) -> f64 {
    let e0 = series.first().copied().unwrap_or(0.0);
    if e0 <= 0.0 {
        return 0.0;
    }
    series
        .windows(2)
        .map(|w| (w[1] - w[0]) / e0)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

fn evolution_defect(ev: &[Evolution]) -> f64 {
    ev.iter().map(|e| dissipation_defect(&e.energy)).fold(0.0, f64::max)
}

fn list(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", v.join(", "))
}

fn relative_asymmetry(dim: usize, a: &Mat3) -> f64 {
    asymmetry(dim, a) / max_entry(dim, a).max(f64::MIN_POSITIVE)
}

/// Runs every check that applies to the configured geometry and regime.
pub fn run_checks(config: &RunConfig, exec: Exec) -> Result<Ledger> {
    let mut l = Ledger::default();
    let spec = config.geometry_spec()?;
    let kind = spec.kind;
    let dim = spec.dim();
    let material = config.material();
    let header = Header::new();

    // Mesh.
    let (cell, surf) = build_unit_cell(&spec)?;
    let mesh = &cell.mesh;
    l.at_most("mesh.volume_partition", (mesh.total_volume() - 1.0).abs(), 1e-12);
    l.holds("mesh.normal_consistency", surf.normals_consistent(mesh), String::new());
    let shift = mesh
        .periodic
        .iter()
        .map(|p| {
            (0..dim)
                .map(|d| {
                    let e = if d == p.axis { 1.0 } else { 0.0 };
                    (mesh.vertices[p.q][d] - mesh.vertices[p.p][d] - e).abs()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    l.at_most("mesh.periodic_shift", shift, 0.0);
    let mut per_comp = vec![0usize; surf.n_components];
    for &c in &surf.components {
        per_comp[c] += 1;
    }
    l.at_least(
        "mesh.facets_per_component",
        per_comp.iter().copied().min().unwrap_or(0) as f64,
        8.0,
    );
    let text = io::write_mesh(mesh, &header);
    l.holds(
        "mesh.archive_roundtrip",
        io::read_mesh(&text).map(|(m, _)| &m == mesh).unwrap_or(false),
        String::new(),
    );
    match kind {
        GeometryKind::Layered2D => {
            let (a, b) = (spec.param("a")?, spec.param("b")?);
            l.at_most("mesh.layer_volume", (cell.inclusion_volume() - (b - a)).abs(), 1e-12);
        }
        GeometryKind::Disk2D => {
            let r0 = spec.param("r0")?;
            let exact = PI * r0 * r0;
            // A chord polygon with facets of length h loses (h/r0)²/6 of the area.
            let limit = (spec.resolution / r0).powi(2) / 3.0;
            l.at_most("mesh.disk_area", (cell.inclusion_volume() - exact).abs() / exact, limit);
            for &eta in config.sweep.eta.iter().filter(|&&e| e <= 0.1) {
                let mc = build_membrane_cell(&spec, eta)?;
                let band = mc.mesh.phase_volume(Phase::Membrane);
                let nominal = eta * 2.0 * PI * r0;
                l.at_most(
                    &format!("mesh.membrane_band[eta={eta}]"),
                    (band / nominal - 1.0).abs(),
                    0.1,
                );
            }
        }
        GeometryKind::TubeLattice3D => {}
    }

    // Cell functions.
    let problem = CellProblem::new(&cell, &surf, material, exec)?;
    let set = solve_cell_functions(&problem, config.kernel_grid(), config.compatibility()?)?;
    let measures = surf.component_measures();
    let compat = set
        .chi0
        .out_flux
        .iter()
        .flat_map(|q| q.iter().zip(&measures).map(|(q, m)| q.abs() / m))
        .fold(0.0, f64::max);
    l.at_most("cell.compatibility", compat, COMPATIBILITY_TOL);
    let mean = set
        .chi0
        .fields
        .iter()
        .map(|x| problem.mean(x).abs() / x.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    l.at_most("cell.chi0_mean", mean, 1e-12);
    l.at_most("cell.dissipation_chi1", evolution_defect(&set.chi1), 1e-12);
    l.at_most("cell.dissipation_omega", evolution_defect(&set.omega), 1e-12);
    let tilde = problem.solve_chi0_tilde()?;
    let archive = CellArchive::from_functions(&problem, &set, &tilde);
    let text = io::write_cell_archive(&archive, &header);
    l.holds(
        "cell.archive_roundtrip",
        io::read_cell_archive(&text).map(|(a, _)| a == archive).unwrap_or(false),
        String::new(),
    );

    // Tensors.
    let t = EffectiveTensors::compute(&problem, &set, &tilde)?;
    let a_tot = t.a_total();
    l.at_most("tensors.a_symmetry", relative_asymmetry(dim, &a_tot), 1e-6);
    let eig = sym_eigenvalues(dim, &a_tot);
    l.at_least("tensors.a_coercivity", eig[0] / material.lambda_min(), 0.95);
    let (worst_name, worst) =
        t.discrepancies().into_iter().fold(
            (String::new(), 0.0f64),
            |(n, w), (m, d)| if d > w { (m, d) } else { (n, w) },
        );
    l.push(
        "tensors.dual_forms",
        worst,
        1e-5,
        Bound::AtMost,
        worst <= 1e-5,
        format!("worst: {worst_name}"),
    );
    let alpha = material.alpha;
    let c0 = &t.c0.primary;
    match kind {
        GeometryKind::Disk2D => {
            l.at_most(
                "tensors.c0_vanishes",
                max_entry(dim, c0) / (alpha * t.gamma_measure),
                5e-3,
            );
        }
        GeometryKind::Layered2D => {
            let off = c0[0][1].abs().max(c0[1][0].abs()).max(c0[1][1].abs());
            l.at_most("tensors.c0_degenerate_entries", off / alpha, 1e-6);
            l.at_most(
                "tensors.c0_tangential",
                (c0[0][0] - 2.0 * alpha).abs() / (2.0 * alpha),
                1e-4,
            );
        }
        GeometryKind::TubeLattice3D => {
            l.at_most("tensors.c0_symmetry", relative_asymmetry(dim, c0), 1e-5);
            let e = sym_eigenvalues(dim, c0);
            l.at_least("tensors.c0_spectral_ratio", e[0] / e[dim - 1], 0.05);
        }
    }
    let kg = &t.a_hom_kgt1.primary;
    l.at_most("tensors.ahom_kgt1_symmetry", relative_asymmetry(dim, kg), 1e-6);
    l.at_least("tensors.ahom_kgt1_min_eig", sym_eigenvalues(dim, kg)[0], 0.0);
    if material.lambda_int == material.lambda_out {
        let li = add_scaled_identity(dim, &[[0.0; 3]; 3], material.lambda_int);
        let d = crate::tensors::max_diff(dim, kg, &li) / material.lambda_int;
        l.at_most("tensors.ahom_kgt1_uniform", d, 1e-10);
    }
    if kind == GeometryKind::Layered2D {
        let (a, b) = (spec.param("a")?, spec.param("b")?);
        let (li, lo) = (material.lambda_int, material.lambda_out);
        let f_int = b - a;
        let arith = f_int * li + (1.0 - f_int) * lo;
        let harm = 1.0 / (f_int / li + (1.0 - f_int) / lo);
        let d = ((kg[0][0] - arith).abs() / arith).max((kg[1][1] - harm).abs() / harm);
        l.at_most("tensors.ahom_kgt1_layered", d, 1e-3);
    }
    match (&t.a_hom_klt1, kind.inclusions_connected()) {
        (Some(a), false) => {
            l.at_most("tensors.ahom_klt1_symmetry", relative_asymmetry(dim, &a.primary), 1e-6);
            l.at_least("tensors.ahom_klt1_min_eig", sym_eigenvalues(dim, &a.primary)[0], 0.0);
        }
        (None, true) => l.holds("tensors.ahom_klt1_vanishing_limit", true, String::new()),
        (got, _) => l.holds(
            "tensors.ahom_klt1_class",
            false,
            format!(
                "tensor {} for this geometry class",
                if got.is_some() { "present" } else { "missing" }
            ),
        ),
    }
    let text = io::write_tensors(&t, &header);
    l.holds(
        "tensors.archive_roundtrip",
        io::read_tensors(&text).map(|(r, _)| r == t).unwrap_or(false),
        String::new(),
    );

    // Macro problem.
    let pipeline = Pipeline {
        config: config.clone(),
        out_dir: Default::default(),
        exec,
        vtk: false,
    };
    let p = pipeline.macro_problem(&t)?;
    let s = macroscale::solve(&p)?;
    let dirichlet = s
        .field
        .values
        .iter()
        .all(|u| u.iter().zip(&s.boundary).all(|(v, &b)| !b || *v == 0.0));
    l.holds("macro.dirichlet", dirichlet, String::new());
    l.holds(
        "macro.finite",
        s.field.values.iter().flatten().all(|v| v.is_finite()),
        String::new(),
    );
    let regime = p.regime;
    let with_data = |u0: Data, f: Data| -> Result<Vec<Vec<f64>>> {
        let q = MacroProblem::new(
            dim,
            config.macro_.n,
            regime,
            MacroCoefficients::from_tensors(&t, regime),
            &u0,
            f,
            config.macro_.t_final,
            config.macro_.dt,
        )?
        .with_exec(exec);
        Ok(macroscale::solve(&q)?.field.values)
    };
    let zero = with_data(Preset::Zero.into(), Preset::Zero.into())?;
    l.at_most(
        "macro.zero_data",
        zero.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs())),
        0.0,
    );
    if s.flag.is_none() {
        let a = with_data(Preset::SinProduct.into(), Preset::Zero.into())?;
        let b = with_data(Preset::Zero.into(), Preset::GaussianBump.into())?;
        let ab = with_data(Preset::SinProduct.into(), Preset::GaussianBump.into())?;
        let scale = ab.iter().flatten().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let lin = a
            .iter()
            .flatten()
            .zip(b.iter().flatten())
            .zip(ab.iter().flatten())
            .map(|((x, y), z)| (x + y - z).abs() / scale)
            .fold(0.0, f64::max);
        l.at_most("macro.linearity", lin, 1e-10);
    }
    if regime.has_memory() && p.n_steps >= 2 {
        // The first half of the run must not see kernel samples or data
        // beyond its own horizon.
        let half = p.n_steps / 2;
        let q = MacroProblem::new(
            dim,
            config.macro_.n,
            regime,
            MacroCoefficients::from_tensors(&t, regime),
            &config.data.u0.into(),
            config.data.f.into(),
            half as f64 * p.dt,
            p.dt,
        )?
        .with_exec(exec);
        let prefix = macroscale::solve(&q)?;
        l.holds(
            "macro.causality",
            prefix.field.values[..] == s.field.values[..=half],
            String::new(),
        );
    }

    // Micro and membrane dissipation (f = 0).
    let u0 = if config.data.u0.is_zero() {
        Preset::SinProduct
    } else {
        config.data.u0
    };
    // Largest ε whose tiling still carries an interface.
    let mut eps_desc = config.sweep.eps.clone();
    eps_desc.sort_by(|a, b| b.total_cmp(a));
    let mut probe = None;
    for &eps in &eps_desc {
        let m = crate::geometry::tile_micro_domain(&cell, eps)?;
        if m.surf.n_facets() > 0 {
            probe = Some((eps, m));
            break;
        }
    }
    if let Some((eps, m)) = probe {
        let r = MicroRun {
            micro: Arc::new(m),
            material,
            k: config.scaling.k,
            source: Preset::Zero.into(),
            u0_bar: u0.into(),
            t_final: config.macro_.t_final,
            dt: config.macro_.dt,
            method: crate::fem::Method::Direct,
            exec,
        };
        let sol = micro::solve_micro(&r)?;
        l.at_most(
            &format!("micro.dissipation[eps={eps}]"),
            dissipation_defect(&sol.lyapunov),
            1e-12,
        );
        let dir = sol
            .field
            .values
            .iter()
            .all(|u| u.iter().zip(&r.micro.boundary).all(|(v, &b)| !b || *v == 0.0));
        l.holds(&format!("micro.dirichlet[eps={eps}]"), dir, String::new());
        if kind == GeometryKind::Disk2D {
            for &eta in &config.sweep.eta {
                let mc = build_membrane_cell(&spec, eta)?;
                let run = MembraneRun {
                    micro: Arc::new(crate::geometry::tile_micro_domain_with(
                        &mc.mesh,
                        eps,
                        crate::geometry::TileOptions {
                            strip_boundary_inclusions: false,
                            clip_boundary_interface: false,
                        },
                    )?),
                    eta,
                    material,
                    u0_bar: u0.into(),
                    t_final: config.macro_.t_final,
                    dt: config.macro_.dt,
                    method: crate::fem::Method::Direct,
                    exec,
                };
                let sol = micro::solve_membrane(&run)?;
                l.at_most(
                    &format!("membrane.dissipation[eta={eta}]"),
                    dissipation_defect(&sol.lyapunov),
                    1e-12,
                );
            }
        }
    }

    // Sweeps.
    if config.sweep.eps.len() >= 2 {
        let runs: Vec<MicroRun> = config
            .sweep
            .eps
            .iter()
            .map(|&eps| {
                Ok(MicroRun {
                    micro: Arc::new(crate::geometry::tile_micro_domain(&cell, eps)?),
                    material,
                    k: config.scaling.k,
                    source: config.data.f.into(),
                    u0_bar: config.data.u0.into(),
                    t_final: config.macro_.t_final,
                    dt: config.macro_.dt,
                    method: crate::fem::Method::Direct,
                    exec,
                })
            })
            .collect::<Result<_>>()?;
        let reference = if pipeline.sweep_uses_zero_reference()? {
            Reference::Zero
        } else {
            Reference::Macro(&s)
        };
        let r = micro::convergence_study("eps", &runs, reference, exec)?;
        let errs: Vec<f64> = r.rows.iter().map(|x| x.error_l2).collect();
        l.holds(
            "study.eps_monotone",
            r.monotone_decrease(),
            format!("errors {}", list(&errs)),
        );
    }
    if config.sweep.eta.len() >= 2 {
        let r = pipeline.concentration(&cell)?;
        let errs: Vec<f64> = r.rows.iter().map(|x| x.error_l2).collect();
        l.holds(
            "study.eta_monotone",
            r.monotone_decrease(),
            format!("errors {}", list(&errs)),
        );
    }
    Ok(l)
}
