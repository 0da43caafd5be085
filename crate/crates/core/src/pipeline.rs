//! The `bh` subcommands as library functions.
//!
//! Each command reads its upstream artifacts from the output directory,
//! checks them against the upstream manifest, writes its own artifacts and
//! finally a `<command>.bhrun` manifest. Artifact bodies are deterministic;
//! timestamps and wall times appear only in manifests.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::cell::{solve_cell_functions, CellProblem};
use crate::config::RunConfig;
use crate::error::{BhError, Result};
use crate::fem::Method;
use crate::geometry::{
    build_membrane_cell, tile_micro_domain, tile_micro_domain_with, unit_box_mesh, CellMesh, GeometryKind, SurfaceMesh,
    TileOptions,
};
use crate::io::{self, f, CellArchive, Header, Manifest, SolutionArchive};
use crate::macroscale::{self, MacroCoefficients, MacroProblem, MacroSolution, Regime, TransientField};
use crate::micro::{self, MembraneRun, MicroOperators, MicroRun, Reference};
use crate::par::Exec;
use crate::tensors::{max_entry, EffectiveTensors};

pub const TOOL_VERSION: &str = concat!("bh ", env!("CARGO_PKG_VERSION"));

/// Relative tolerance of the per-component Γ flux of χ₀.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Result of one command: whether its checks passed and a human-readable
/// summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: Vec<String>,
}

pub struct Pipeline {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub exec: Exec,
    /// Also write legacy-VTK files.
    pub vtk: bool,
}

/// Collects the input and output hashes of one command.
struct Run<'a> {
    pipeline: &'a Pipeline,
    command: &'static str,
    started: SystemTime,
    clock: Instant,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.pipeline.out_dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| BhError::MissingArtifact(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push((name.to_string(), io::sha256_hex(body.as_bytes())));
        Ok(())
    }

    /// Reads `name`, produced by `upstream`, after checking the upstream
    /// manifest.
    fn read(&mut self, upstream: &str, name: &str) -> Result<String> {
        let dir = &self.pipeline.out_dir;
        let manifest = Manifest::load(&dir.join(format!("{upstream}.bhrun")))
            .map_err(|e| BhError::MissingArtifact(format!("{e}; run `bh {upstream}` first")))?;
        if !manifest.outputs.iter().any(|(n, _)| n == name) {
            return Err(BhError::MissingArtifact(format!(
                "{upstream}.bhrun does not list {name}; rerun `bh {upstream}`"
            )));
        }
        manifest.verify_outputs(dir)?;
        let text = io::read_text(&dir.join(name))?;
        self.inputs.push((name.to_string(), io::sha256_hex(text.as_bytes())));
        Ok(text)
    }

    fn finish(self, outcome: Outcome) -> Result<Outcome> {
        let m = Manifest {
            command: self.command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: self.pipeline.config.hash(),
            started_unix: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_time_s: self.clock.elapsed().as_secs_f64(),
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.pipeline.out_dir.join(format!("{}.bhrun", self.command));
        std::fs::write(&path, m.render())
            .map_err(|e| BhError::MissingArtifact(format!("cannot write {}: {e}", path.display())))?;
        Ok(outcome)
    }
}

fn mismatch(what: &str, file: &str, upstream: &str) -> BhError {
    BhError::MissingArtifact(format!(
        "{file} was produced for a different {what} than the config requests; rerun `bh {upstream}`"
    ))
}

fn check_header(h: &Header, key: &str, expected: &str, file: &str, upstream: &str) -> Result<()> {
    match h.get(key) {
        Some(v) if v == expected => Ok(()),
        Some(_) => Err(mismatch(key.trim_end_matches("_hash"), file, upstream)),
        None => Err(BhError::MissingArtifact(format!(
            "{file} lacks `{key}`; rerun `bh {upstream}`"
        ))),
    }
}

impl Pipeline {
    pub fn new(config: RunConfig, out_dir: PathBuf) -> Self {
        Pipeline {
            config,
            out_dir,
            exec: Exec::default(),
            vtk: false,
        }
    }

    fn start(&self, command: &'static str) -> Result<Run<'_>> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| BhError::MissingArtifact(format!("cannot create {}: {e}", self.out_dir.display())))?;
        Ok(Run {
            pipeline: self,
            command,
            started: SystemTime::now(),
            clock: Instant::now(),
            inputs: vec![],
            outputs: vec![],
        })
    }

    /// Provenance lines shared by every artifact.
    pub fn header(&self) -> Result<Header> {
        let c = &self.config;
        let m = &c.material;
        let mut h = Header::new();
        h.insert("tool".into(), TOOL_VERSION.into());
        h.insert("config_hash".into(), c.hash());
        h.insert("geometry_hash".into(), c.geometry_hash()?);
        h.insert("cell_hash".into(), c.cell_hash()?);
        h.insert("geometry".into(), c.geometry_spec()?.describe());
        h.insert(
            "material".into(),
            format!(
                "lambda_int={} lambda_out={} alpha={}",
                f(m.lambda_int),
                f(m.lambda_out),
                f(m.alpha)
            ),
        );
        let g = c.kernel_grid();
        h.insert("kernel".into(), format!("dt={} steps={}", f(g.dt), g.n_steps));
        h.insert("scaling".into(), format!("k={}", f(c.scaling.k)));
        Ok(h)
    }

    pub fn cmd_mesh(&self) -> Result<Outcome> {
        let mut run = self.start("mesh")?;
        let spec = self.config.geometry_spec()?;
        let (cell, surf) = crate::geometry::build_unit_cell(&spec)?;
        run.write("mesh.bhmesh", &io::write_mesh(&cell.mesh, &self.header()?))?;
        if self.vtk {
            run.write("mesh.vtk", &io::vtk::write_vtk(&cell.mesh, "bh cell mesh", &[]))?;
        }
        let summary = vec![
            format!(
                "cell mesh: {} vertices, {} elements, {} interface facets in {} components",
                cell.mesh.n_vertices(),
                cell.mesh.n_elements(),
                surf.n_facets(),
                surf.n_components
            ),
            format!(
                "|E_int| = {}, |Gamma| = {}",
                f(cell.inclusion_volume()),
                f(surf.total_measure())
            ),
        ];
        run.finish(Outcome { passed: true, summary })
    }

    fn load_cell_mesh(&self, run: &mut Run) -> Result<(CellMesh, SurfaceMesh)> {
        let text = run.read("mesh", "mesh.bhmesh")?;
        let (mesh, header) = io::read_mesh(&text)?;
        check_header(
            &header,
            "geometry_hash",
            &self.config.geometry_hash()?,
            "mesh.bhmesh",
            "mesh",
        )?;
        let surf = SurfaceMesh::from_mesh(&mesh)?;
        Ok((
            CellMesh {
                spec: self.config.geometry_spec()?,
                mesh,
            },
            surf,
        ))
    }

    pub fn cmd_cell(&self) -> Result<Outcome> {
        let mut run = self.start("cell")?;
        let (cell, surf) = self.load_cell_mesh(&mut run)?;
        let problem = CellProblem::new(&cell, &surf, self.config.material(), self.exec)?;
        let set = solve_cell_functions(&problem, self.config.kernel_grid(), self.config.compatibility()?)?;
        let tilde = problem.solve_chi0_tilde()?;
        let archive = CellArchive::from_functions(&problem, &set, &tilde);
        run.write("cell.bhcell", &io::write_cell_archive(&archive, &self.header()?))?;

        let measures = surf.component_measures();
        let mut csv = String::from("component,direction,out_flux,measure,relative,pass\n");
        let mut worst: f64 = 0.0;
        for (j, fluxes) in set.chi0.out_flux.iter().enumerate() {
            for (i, &q) in fluxes.iter().enumerate() {
                let rel = q.abs() / measures[i];
                worst = worst.max(rel);
                csv.push_str(&format!(
                    "{i},{j},{},{},{},{}\n",
                    f(q),
                    f(measures[i]),
                    f(rel),
                    rel <= COMPATIBILITY_TOL
                ));
            }
        }
        run.write("compatibility.csv", &csv)?;
        if self.vtk {
            let fields: Vec<(String, Vec<f64>)> = archive
                .chi0
                .iter()
                .enumerate()
                .map(|(j, x)| (format!("chi0_{j}"), x.clone()))
                .collect();
            let refs: Vec<(&str, &[f64])> = fields.iter().map(|(n, x)| (n.as_str(), x.as_slice())).collect();
            run.write("cell.vtk", &io::vtk::write_vtk(&cell.mesh, "bh cell functions", &refs))?;
        }
        let passed = worst <= COMPATIBILITY_TOL;
        let summary = vec![
            format!(
                "cell functions on {} dofs, {} kernel levels",
                problem.n_dofs(),
                set.grid.n_steps + 1
            ),
            format!(
                "max relative compatibility defect {} (limit {})",
                f(worst),
                f(COMPATIBILITY_TOL)
            ),
        ];
        run.finish(Outcome { passed, summary })
    }

    pub fn cmd_tensors(&self) -> Result<Outcome> {
        let mut run = self.start("tensors")?;
        let (cell, surf) = self.load_cell_mesh(&mut run)?;
        let text = run.read("cell", "cell.bhcell")?;
        let (archive, header) = io::read_cell_archive(&text)?;
        check_header(&header, "cell_hash", &self.config.cell_hash()?, "cell.bhcell", "cell")?;
        let problem = CellProblem::new(&cell, &surf, self.config.material(), self.exec)?;
        if archive.n_vertices != cell.mesh.n_vertices() {
            return Err(mismatch("mesh", "cell.bhcell", "cell"));
        }
        let (set, tilde) = archive.to_functions(&problem);
        let t = EffectiveTensors::compute(&problem, &set, &tilde)?;
        run.write("tensors.bhtens", &io::write_tensors(&t, &self.header()?))?;
        let check = t.cross_check();
        let dim = t.dim;
        let mut summary = vec![
            format!("lambda0 = {}", f(t.lambda0)),
            format!(
                "max |A0| = {}, max |C0| = {}",
                f(max_entry(dim, &t.a0.primary)),
                f(max_entry(dim, &t.c0.primary))
            ),
        ];
        if let Err(e) = &check {
            summary.push(e.to_string());
        }
        run.finish(Outcome {
            passed: check.is_ok(),
            summary,
        })
    }

    fn load_tensors(&self, run: &mut Run) -> Result<EffectiveTensors> {
        let text = run.read("tensors", "tensors.bhtens")?;
        let (t, header) = io::read_tensors(&text)?;
        check_header(
            &header,
            "geometry_hash",
            &self.config.geometry_hash()?,
            "tensors.bhtens",
            "tensors",
        )?;
        check_header(
            &header,
            "cell_hash",
            &self.config.cell_hash()?,
            "tensors.bhtens",
            "tensors",
        )?;
        Ok(t)
    }

    /// Macro problem for the configured regime on the configured grid.
    pub fn macro_problem(&self, t: &EffectiveTensors) -> Result<MacroProblem> {
        let c = &self.config;
        let regime = c.regime()?;
        let p = MacroProblem::new(
            t.dim,
            c.macro_.n,
            regime,
            MacroCoefficients::from_tensors(t, regime),
            &c.data.u0.into(),
            c.data.f.into(),
            c.macro_.t_final,
            c.macro_.dt,
        )?;
        Ok(p.with_exec(self.exec))
    }

    pub fn cmd_macro(&self) -> Result<Outcome> {
        let mut run = self.start("macro")?;
        let t = self.load_tensors(&mut run)?;
        let p = self.macro_problem(&t)?;
        let s = macroscale::solve(&p)?;
        let mut header = self.header()?;
        header.insert("regime".into(), s.regime.name().into());
        header.insert(
            "macro".into(),
            format!("n={} dt={} steps={}", self.config.macro_.n, f(p.dt), p.n_steps),
        );
        if let Some(flag) = &s.flag {
            header.insert("flag".into(), flag.clone());
        }
        let archive = SolutionArchive {
            dim: p.dim,
            mesh: format!("unit_box {} {}", p.dim, self.config.macro_.n),
            times: s.field.times.clone(),
            values: s.field.values.clone(),
        };
        run.write("macro.bhsol", &io::write_solution(&archive, &header))?;
        let energy_norm: Vec<f64> = s.energy.iter().map(|e| e.max(0.0).sqrt()).collect();
        run.write(
            "macro.csv",
            &io::solution_summary_csv(&s.field.times, &s.l2, &energy_norm, &header),
        )?;
        if self.vtk {
            for (n, u) in s.field.values.iter().enumerate() {
                run.write(
                    &format!("macro_{n:04}.vtk"),
                    &io::vtk::write_vtk(&p.mesh, "bh macro solution", &[("u", u)]),
                )?;
            }
        }
        let mut summary = vec![format!(
            "{} regime, {} levels, final L2 norm {}",
            s.regime,
            s.field.n_levels(),
            f(*s.l2.last().unwrap_or(&0.0))
        )];
        if let Some(flag) = s.flag {
            summary.push(flag);
        }
        run.finish(Outcome { passed: true, summary })
    }

    fn micro_run(&self, cell: &CellMesh, eps: f64) -> Result<MicroRun> {
        let c = &self.config;
        Ok(MicroRun {
            micro: Arc::new(tile_micro_domain(cell, eps)?),
            material: c.material(),
            k: c.scaling.k,
            source: c.data.f.into(),
            u0_bar: c.data.u0.into(),
            t_final: c.macro_.t_final,
            dt: c.macro_.dt,
            method: Method::Direct,
            exec: self.exec,
        })
    }

    pub fn cmd_micro(&self) -> Result<Outcome> {
        let mut run = self.start("micro")?;
        let (cell, _) = self.load_cell_mesh(&mut run)?;
        let mut summary = vec![];
        for &eps in &self.config.sweep.eps {
            let r = self.micro_run(&cell, eps)?;
            let s = micro::solve_micro(&r)?;
            let ops = MicroOperators::assemble(&r.micro, &r.material, self.exec)?;
            let l2: Vec<f64> = s
                .field
                .values
                .iter()
                .map(|u| ops.mass.form(u, u).max(0.0).sqrt())
                .collect();
            let en: Vec<f64> = s
                .field
                .values
                .iter()
                .map(|u| ops.k.form(u, u).max(0.0).sqrt())
                .collect();
            let mut header = self.header()?;
            header.insert("eps".into(), f(eps));
            let stem = format!("micro_e{}", r.micro.n);
            let archive = SolutionArchive {
                dim: r.micro.mesh.dim,
                mesh: format!("micro eps={}", f(eps)),
                times: s.field.times.clone(),
                values: s.field.values.clone(),
            };
            run.write(&format!("{stem}.bhsol"), &io::write_solution(&archive, &header))?;
            run.write(
                &format!("{stem}.csv"),
                &io::solution_summary_csv(&s.field.times, &l2, &en, &header),
            )?;
            if self.vtk {
                let last = s.field.values.last().map(Vec::as_slice).unwrap_or(&[]);
                run.write(
                    &format!("{stem}.vtk"),
                    &io::vtk::write_vtk(&r.micro.mesh, "bh micro solution (final level)", &[("u", last)]),
                )?;
            }
            summary.push(format!(
                "eps = {eps}: {} vertices, energy bulk {} surface {}",
                r.micro.mesh.n_vertices(),
                f(s.energy_bulk),
                f(s.energy_surface)
            ));
        }
        run.finish(Outcome { passed: true, summary })
    }

    fn load_macro(&self, run: &mut Run) -> Result<MacroSolution> {
        let text = run.read("macro", "macro.bhsol")?;
        let (a, header) = io::read_solution(&text)?;
        check_header(&header, "cell_hash", &self.config.cell_hash()?, "macro.bhsol", "macro")?;
        let regime = self.config.regime()?;
        check_header(&header, "regime", regime.name(), "macro.bhsol", "macro")?;
        let expected = format!("unit_box {} {}", self.config.kind()?.dim(), self.config.macro_.n);
        let n_levels = (self.config.macro_.t_final / self.config.macro_.dt).round() as usize + 1;
        if a.mesh != expected || a.times.len() != n_levels {
            return Err(mismatch("macro grid", "macro.bhsol", "macro"));
        }
        let (mesh, boundary) = unit_box_mesh(a.dim, self.config.macro_.n);
        Ok(MacroSolution {
            regime,
            field: TransientField {
                mesh: Arc::new(mesh),
                times: a.times,
                values: a.values,
            },
            boundary,
            flag: header.get("flag").cloned(),
            l2: vec![],
            energy: vec![],
        })
    }

    /// Which reference the ε-sweep compares against: the zero limit for
    /// k < 1 on connected inclusions, the homogenized solution otherwise.
    pub fn sweep_uses_zero_reference(&self) -> Result<bool> {
        Ok(self.config.regime()? == Regime::Klt1 && self.config.kind()?.inclusions_connected())
    }

    pub fn cmd_converge(&self) -> Result<Outcome> {
        let mut run = self.start("converge")?;
        let (cell, _) = self.load_cell_mesh(&mut run)?;
        let header = self.header()?;
        let mut summary = vec![];
        let mut passed = true;
        if self.config.sweep.eps.len() >= 2 {
            let runs: Vec<MicroRun> = self
                .config
                .sweep
                .eps
                .iter()
                .map(|&e| self.micro_run(&cell, e))
                .collect::<Result<_>>()?;
            let report = if self.sweep_uses_zero_reference()? {
                micro::convergence_study("eps", &runs, Reference::Zero, self.exec)?
            } else {
                let m = self.load_macro(&mut run)?;
                micro::convergence_study("eps", &runs, Reference::Macro(&m), self.exec)?
            };
            run.write("study_eps.csv", &io::write_study_csv(&report, &header))?;
            passed &= report.monotone_decrease();
            summary.push(format!("eps sweep monotone_decrease: {}", report.monotone_decrease()));
        }
        if self.config.sweep.eta.len() >= 2 {
            let report = self.concentration(&cell)?;
            run.write("study_eta.csv", &io::write_study_csv(&report, &header))?;
            passed &= report.monotone_decrease();
            summary.push(format!("eta sweep monotone_decrease: {}", report.monotone_decrease()));
        }
        if summary.is_empty() {
            summary.push("no sweep configured (sweep.eps and sweep.eta need two entries)".into());
        }
        run.finish(Outcome { passed, summary })
    }

    /// η-sweep at the largest configured ε (1/2 by default). Inclusions
    /// are kept in boundary cells so the coarse tiling still carries
    /// membranes.
    pub fn concentration(&self, cell: &CellMesh) -> Result<micro::StudyReport> {
        let c = &self.config;
        if c.kind()? != GeometryKind::Disk2D {
            return Err(BhError::ConfigInvalid(
                "the eta sweep needs geometry.kind = disk2d".into(),
            ));
        }
        let eps = c.sweep.eps.iter().cloned().fold(0.5, f64::max);
        let keep = TileOptions {
            strip_boundary_inclusions: false,
            clip_boundary_interface: false,
        };
        let concentrated = micro::solve_micro(&MicroRun {
            micro: Arc::new(tile_micro_domain_with(&cell.mesh, eps, keep)?),
            material: c.material(),
            k: 1.0,
            source: crate::presets::Preset::Zero.into(),
            u0_bar: c.data.u0.into(),
            t_final: c.macro_.t_final,
            dt: c.macro_.dt,
            method: Method::Direct,
            exec: self.exec,
        })?;
        let runs: Vec<MembraneRun> = c
            .sweep
            .eta
            .iter()
            .map(|&eta| {
                let mc = build_membrane_cell(&cell.spec, eta)?;
                Ok(MembraneRun {
                    micro: Arc::new(tile_micro_domain_with(&mc.mesh, eps, keep)?),
                    eta,
                    material: c.material(),
                    u0_bar: c.data.u0.into(),
                    t_final: c.macro_.t_final,
                    dt: c.macro_.dt,
                    method: Method::Direct,
                    exec: self.exec,
                })
            })
            .collect::<Result<_>>()?;
        micro::concentration_study(&concentrated, &runs, self.exec)
    }

    pub fn cmd_verify(&self) -> Result<Outcome> {
        let mut run = self.start("verify")?;
        let ledger = crate::verify::run_checks(&self.config, self.exec)?;
        run.write("verify.txt", &ledger.render(&self.config.hash()))?;
        let passed = ledger.passed();
        let failed = ledger.checks.iter().filter(|c| !c.pass).count();
        let summary = vec![format!("{} checks, {} failed", ledger.checks.len(), failed)];
        run.finish(Outcome { passed, summary })
    }
}

/// Output directory: `--out`, then `BH_OUTPUT_DIR`, then the config.
pub fn resolve_out_dir(config: &RunConfig, cli: Option<&Path>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os("BH_OUTPUT_DIR") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => config.output.dir.clone(),
    }
}
