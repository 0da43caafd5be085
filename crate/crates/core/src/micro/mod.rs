//! Direct ε-scale solvers (dynamic interface and thick membrane), local
//! averages and the ε/η convergence harnesses.

mod locate;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use locate::PointLocator;

use crate::cell::Material;
use crate::error::{BhError, Result};
use crate::fem::{
    assemble_surface_stiffness, bulk_stiffness, mass_matrix, Coeffs, Csr, DirichletSolver, DofMap, Method,
};
use crate::geometry::{MicroMesh, Phase};
use crate::macroscale::{trapezoid, Data, MacroSolution, TransientField};
use crate::par::{self, Exec};

/// Discrete operators of the ε-problem on one micro mesh.
pub struct MicroOperators {
    /// Bulk stiffness with λ_int / λ_out.
    pub k: Csr,
    /// Unit-coefficient bulk stiffness, for ∫|∇u|².
    pub k_unit: Csr,
    /// Tangential stiffness on Γ^ε.
    pub s: Csr,
    pub mass: Csr,
    /// Vertex lies on Γ^ε.
    pub on_gamma: Vec<bool>,
}

impl MicroOperators {
    pub fn assemble(micro: &MicroMesh, material: &Material, exec: Exec) -> Result<Self> {
        let mesh = &micro.mesh;
        let dofs = DofMap::identity(mesh.n_vertices());
        let coeffs = material.coeffs();
        for (phase, value, name) in [
            (Phase::Int, coeffs.int, "lambda_int"),
            (Phase::Out, coeffs.out, "lambda_out"),
        ] {
            if mesh.phases.contains(&phase) && !(value > 0.0) {
                return Err(BhError::NonpositiveCoefficient { name, value });
            }
        }
        let mut on_gamma = vec![false; mesh.n_vertices()];
        for f in 0..micro.surf.n_facets() {
            for &v in micro.surf.facet(f) {
                on_gamma[v] = true;
            }
        }
        Ok(MicroOperators {
            k: bulk_stiffness(mesh, &dofs, &coeffs, exec),
            k_unit: bulk_stiffness(mesh, &dofs, &Coeffs::uniform(1.0), exec),
            s: assemble_surface_stiffness(mesh, &micro.surf, &dofs, exec)?,
            mass: mass_matrix(mesh, &dofs, exec),
            on_gamma,
        })
    }
}

/// One ε-scale run of the dynamic-interface problem.
#[derive(Debug, Clone)]
pub struct MicroRun {
    pub micro: Arc<MicroMesh>,
    pub material: Material,
    /// Scaling exponent of the interface term ε^k α.
    pub k: f64,
    pub source: Data,
    /// ū₀; the run uses ε^{(1−k)/2} ū₀.
    pub u0_bar: Data,
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
    pub exec: Exec,
}

impl MicroRun {
    pub fn n_steps(&self) -> Result<usize> {
        let s = (self.t_final / self.dt).round();
        if !(self.dt > 0.0) || s < 1.0 || (s * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(BhError::ConfigInvalid(format!(
                "T = {} is not a positive multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(s as usize)
    }

    pub fn surface_weight(&self) -> f64 {
        self.micro.eps.powf(self.k) * self.material.alpha
    }

    pub fn initial_scale(&self) -> f64 {
        self.micro.eps.powf(0.5 * (1.0 - self.k))
    }
}

/// Solution of an ε- or η-run with its energy diagnostics.
#[derive(Debug, Clone)]
pub struct MicroSolution {
    pub field: TransientField,
    /// Per-level dissipated functional: ε^kα uᵀSu (interface runs) or
    /// uᵀK_λ̃u (membrane runs).
    pub lyapunov: Vec<f64>,
    /// ∫₀ᵀ∫_Ω|∇u|².
    pub energy_bulk: f64,
    /// ε^k max_n ∫_Γ|∇^B uⁿ|² (interface runs) or (1/η) max_n ∫_memb|∇uⁿ|².
    pub energy_surface: f64,
}

fn nodal(micro: &MicroMesh, data: &Data, t: f64, scale: f64) -> Vec<f64> {
    let dim = micro.mesh.dim;
    micro
        .mesh
        .vertices
        .iter()
        .zip(&micro.boundary)
        .map(|(x, &b)| if b { 0.0 } else { scale * data.eval(dim, x, t) })
        .collect()
}

fn load(micro: &MicroMesh, mass: &Csr, data: &Data, t: f64) -> Vec<f64> {
    if data.is_zero() {
        return vec![0.0; micro.mesh.n_vertices()];
    }
    let dim = micro.mesh.dim;
    let f: Vec<f64> = micro.mesh.vertices.iter().map(|x| data.eval(dim, x, t)).collect();
    mass.mul_vec(&f)
}

/// Initial state for data prescribed up to one constant per component:
/// u = g + c_i on the vertices of component i, u = 0 on ∂Ω, A u = b on the
/// remaining vertices, and the constants chosen so that the residual
/// A u − b sums to zero over every component. Every later time level
/// satisfies the same balance, since the dynamic operator annihilates
/// per-component constants.
fn consistent_initial(
    a: &Csr,
    boundary: &[bool],
    component: &[Option<usize>],
    g: &[f64],
    b: &[f64],
    method: Method,
) -> Result<Vec<f64>> {
    let n = a.n;
    let m = component.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
    let fixed: Vec<bool> = (0..n).map(|p| boundary[p] || component[p].is_some()).collect();
    let solver = DirichletSolver::new(a, &fixed, method)?;
    let lift = |v: &[f64], load: &[f64]| -> Result<Vec<f64>> {
        let av = a.mul_vec(v);
        let rhs: Vec<f64> = load.iter().zip(&av).map(|(x, y)| x - y).collect();
        let y = solver.solve(&rhs, None)?;
        Ok((0..n).map(|p| if fixed[p] { v[p] } else { y[p] }).collect())
    };
    let balance = |u: &[f64], load: &[f64]| -> Vec<f64> {
        let r = a.mul_vec(u);
        let mut out = vec![0.0; m];
        for p in 0..n {
            if let Some(c) = component[p] {
                out[c] += r[p] - load[p];
            }
        }
        out
    };
    let g: Vec<f64> = (0..n)
        .map(|p| {
            if component[p].is_some() && !boundary[p] {
                g[p]
            } else {
                0.0
            }
        })
        .collect();
    let mut u = lift(&g, b)?;
    if m == 0 {
        return Ok(u);
    }
    let zero = vec![0.0; n];
    let units: Vec<Vec<f64>> = crate::par::map_range(Exec::Serial, m, |k| {
        let e: Vec<f64> = (0..n)
            .map(|p| {
                if component[p] == Some(k) && !boundary[p] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        lift(&e, &zero)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut cap = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (k, e) in units.iter().enumerate() {
        for (i, v) in balance(e, &zero).into_iter().enumerate() {
            cap[(i, k)] = v;
        }
    }
    let r = nalgebra::DVector::from_vec(balance(&u, b).iter().map(|v| -v).collect());
    let c = cap
        .lu()
        .solve(&r)
        .ok_or_else(|| BhError::SolverFailure("singular component capacitance matrix".into()))?;
    for (k, e) in units.iter().enumerate() {
        for p in 0..n {
            u[p] += c[k] * e[p];
        }
    }
    Ok(u)
}

/// Connected components of the vertex sets of `groups` (each group a list
/// of vertex tuples that are mutually connected).
fn vertex_components<'a, I>(n: usize, groups: I) -> Vec<Option<usize>>
where
    I: Iterator<Item = &'a [usize]>,
{
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut member = vec![false; n];
    for g in groups {
        for &v in g {
            member[v] = true;
            let (a, b) = (find(&mut parent, g[0]), find(&mut parent, v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = std::collections::HashMap::new();
    (0..n)
        .map(|v| {
            if !member[v] {
                return None;
            }
            let r = find(&mut parent, v);
            let next = label.len();
            Some(*label.entry(r).or_insert(next))
        })
        .collect()
}

fn collect_energy(
    times: &[f64],
    values: &[Vec<f64>],
    k_unit: &Csr,
    lyap_op: &Csr,
    lyap_weight: f64,
    surf_weight: f64,
) -> (Vec<f64>, f64, f64) {
    let lyap: Vec<f64> = values.iter().map(|u| lyap_weight * lyap_op.form(u, u)).collect();
    let grad: Vec<f64> = values.iter().map(|u| k_unit.form(u, u)).collect();
    let sup = values.iter().map(|u| lyap_op.form(u, u)).fold(0.0, f64::max);
    (lyap, trapezoid(times, &grad), surf_weight * sup)
}

/// Implicit Euler for the ε-problem:
/// [K + (ε^kα/Δt)S] uⁿ = (ε^kα/Δt) S uⁿ⁻¹ + M fⁿ, u = 0 on ∂Ω.
///
/// u⁰ carries the trace ε^{(1−k)/2}ū₀ on Γ^ε, shifted by one constant per
/// interface component, and solves the stationary bulk equation elsewhere.
/// Only the tangential gradient of the trace enters the later steps.
pub fn solve_micro(run: &MicroRun) -> Result<MicroSolution> {
    let n_steps = run.n_steps()?;
    let micro = &run.micro;
    let ops = MicroOperators::assemble(micro, &run.material, run.exec)?;
    let c = run.surface_weight() / run.dt;
    let nv = micro.mesh.n_vertices();

    let ubar = nodal(micro, &run.u0_bar, 0.0, run.initial_scale());
    let comps = vertex_components(nv, (0..micro.surf.n_facets()).map(|f| micro.surf.facet(f)));
    let f0 = load(micro, &ops.mass, &run.source, 0.0);
    let u0 = consistent_initial(&ops.k, &micro.boundary, &comps, &ubar, &f0, run.method)?;

    let step = ops.k.lin_comb(1.0, &ops.s, c);
    let solver = DirichletSolver::new(&step, &micro.boundary, run.method)?;
    let mut values = vec![u0];
    for n in 1..=n_steps {
        let prev = &values[n - 1];
        let mut rhs = ops.s.mul_vec_exec(run.exec, prev);
        let f = load(micro, &ops.mass, &run.source, n as f64 * run.dt);
        par::for_each_mut(run.exec, &mut rhs, |i, r| *r = c * *r + f[i]);
        let u = solver.solve(&rhs, Some(prev))?;
        values.push(u);
    }
    let times: Vec<f64> = (0..=n_steps).map(|n| n as f64 * run.dt).collect();
    let (lyapunov, energy_bulk, energy_surface) = collect_energy(
        &times,
        &values,
        &ops.k_unit,
        &ops.s,
        run.surface_weight(),
        micro.eps.powf(run.k),
    );
    Ok(MicroSolution {
        field: TransientField {
            mesh: Arc::new(micro.mesh.clone()),
            times,
            values,
        },
        lyapunov,
        energy_bulk,
        energy_surface,
    })
}

/// Thick-membrane run: the interface is replaced by a membrane phase of
/// cell-relative thickness η with coefficient α/η and λ = 0.
#[derive(Debug, Clone)]
pub struct MembraneRun {
    /// Tiling of a membrane cell (phases int / membrane / out).
    pub micro: Arc<MicroMesh>,
    pub eta: f64,
    pub material: Material,
    pub u0_bar: Data,
    pub t_final: f64,
    pub dt: f64,
    pub method: Method,
    pub exec: Exec,
}

/// Implicit Euler for [K_λ + (1/Δt)K_λ̃] uⁿ = (1/Δt) K_λ̃ uⁿ⁻¹ with
/// ∇u⁰ = ∇ū₀ in the membrane (u⁰ = ū₀ + const on each membrane ring).
pub fn solve_membrane(run: &MembraneRun) -> Result<MicroSolution> {
    let micro = &run.micro;
    let mesh = &micro.mesh;
    if !mesh.phases.contains(&Phase::Membrane) {
        return Err(BhError::InvalidGeometry(
            "membrane run on a mesh without membrane phase".into(),
        ));
    }
    if !(run.eta > 0.0) {
        return Err(BhError::NonpositiveCoefficient {
            name: "eta",
            value: run.eta,
        });
    }
    let probe = MicroRun {
        micro: micro.clone(),
        material: run.material,
        k: 1.0,
        source: Data::Preset(crate::presets::Preset::Zero),
        u0_bar: run.u0_bar.clone(),
        t_final: run.t_final,
        dt: run.dt,
        method: run.method,
        exec: run.exec,
    };
    let n_steps = probe.n_steps()?;
    let dofs = DofMap::identity(mesh.n_vertices());
    let lam = Coeffs {
        int: run.material.lambda_int,
        membrane: 0.0,
        out: run.material.lambda_out,
    };
    let tilde = Coeffs {
        int: 0.0,
        membrane: run.material.alpha / run.eta,
        out: 0.0,
    };
    if !(tilde.membrane > 0.0 && lam.int > 0.0 && lam.out > 0.0) {
        return Err(BhError::NonpositiveCoefficient {
            name: "alpha",
            value: run.material.alpha,
        });
    }
    let k = bulk_stiffness(mesh, &dofs, &lam, run.exec);
    let kt = bulk_stiffness(mesh, &dofs, &tilde, run.exec);
    let k_unit = bulk_stiffness(mesh, &dofs, &Coeffs::uniform(1.0), run.exec);
    let nv = mesh.n_vertices();

    let ubar = nodal(micro, &run.u0_bar, 0.0, 1.0);
    let comps = vertex_components(
        nv,
        (0..mesh.n_elements())
            .filter(|&e| mesh.phases[e] == Phase::Membrane)
            .map(|e| mesh.element(e)),
    );
    let u0 = consistent_initial(&k, &micro.boundary, &comps, &ubar, &vec![0.0; nv], run.method)?;

    let inv_dt = 1.0 / run.dt;
    let step = k.lin_comb(1.0, &kt, inv_dt);
    let solver = DirichletSolver::new(&step, &micro.boundary, run.method)?;
    let mut values = vec![u0];
    for n in 1..=n_steps {
        let prev = &values[n - 1];
        let rhs: Vec<f64> = kt.mul_vec_exec(run.exec, prev).iter().map(|v| v * inv_dt).collect();
        let u = solver.solve(&rhs, Some(prev))?;
        values.push(u);
    }
    let times: Vec<f64> = (0..=n_steps).map(|n| n as f64 * run.dt).collect();
    let (lyapunov, energy_bulk, energy_surface) =
        collect_energy(&times, &values, &k_unit, &kt, 1.0, 1.0 / run.material.alpha);
    Ok(MicroSolution {
        field: TransientField {
            mesh: Arc::new(mesh.clone()),
            times,
            values,
        },
        lyapunov,
        energy_bulk,
        energy_surface,
    })
}

/// Per-cell volume averages M_ε(u) at every time level, indexed by the
/// flat cell index. Ω is tiled exactly, so every cell is interior.
pub fn local_average(field: &TransientField, micro: &MicroMesh) -> Vec<Vec<f64>> {
    let mesh = &micro.mesh;
    let nc = micro.n_cells();
    let mut vol = vec![0.0; nc];
    for e in 0..mesh.n_elements() {
        vol[micro.element_cell[e]] += mesh.element_volume(e);
    }
    let share = 1.0 / (mesh.dim + 1) as f64;
    field
        .values
        .iter()
        .map(|u| {
            let mut s = vec![0.0; nc];
            for e in 0..mesh.n_elements() {
                let mean: f64 = mesh.element(e).iter().map(|&p| u[p]).sum::<f64>() * share;
                s[micro.element_cell[e]] += mesh.element_volume(e) * mean;
            }
            s.iter().zip(&vol).map(|(a, v)| a / v).collect()
        })
        .collect()
}

/// ‖c − u‖_{L²(Ω_T)} for a cell-wise constant c (n cells per axis) and a P1
/// field u on the macro box mesh. Exact when every macro element lies in
/// one cell, which requires the macro resolution to be a multiple of n.
pub fn cellwise_l2_distance(avg: &[Vec<f64>], n: usize, u: &TransientField) -> Result<f64> {
    let mesh = &u.mesh;
    let dim = mesh.dim;
    if avg.len() != u.n_levels() {
        return Err(BhError::ConfigInvalid(
            "averaged and macro fields have different time grids".into(),
        ));
    }
    let owner: Vec<usize> = (0..mesh.n_elements())
        .map(|e| {
            let c = mesh.element_centroid(e);
            let mut idx = 0;
            for d in (0..dim).rev() {
                idx = idx * n + ((c[d] * n as f64).floor() as usize).min(n - 1);
            }
            idx
        })
        .collect();
    let m = (mesh.n_vertices() as f64).powf(1.0 / dim as f64).round() as usize - 1;
    if !m.is_multiple_of(n) {
        return Err(BhError::ConfigInvalid(format!(
            "macro mesh with {m} cells per axis does not align with {n} cells; use a multiple of {n}"
        )));
    }
    let k = (dim + 1) as f64;
    let sq: Vec<f64> = avg
        .iter()
        .zip(&u.values)
        .map(|(a, v)| {
            let mut s = 0.0;
            for e in 0..mesh.n_elements() {
                let vol = mesh.element_volume(e);
                let vals: Vec<f64> = mesh.element(e).iter().map(|&p| v[p]).collect();
                let sum: f64 = vals.iter().sum();
                let sum_sq: f64 = vals.iter().map(|x| x * x).sum();
                // ∫u = |T| Σu/(d+1); ∫u² = |T| (Σu² + (Σu)²) / ((d+1)(d+2)).
                let int_u = vol * sum / k;
                let int_u2 = vol * (sum_sq + sum * sum) / (k * (k + 1.0));
                let c = a[owner[e]];
                s += c * c * vol - 2.0 * c * int_u + int_u2;
            }
            s.max(0.0)
        })
        .collect();
    Ok(trapezoid(&u.times, &sq).sqrt())
}

/// ‖u_A − u_B‖_{L²(Ω_T)} for P1 fields on different meshes of Ω, by
/// second-order quadrature on the elements of A.
pub fn cross_mesh_l2_distance(a: &TransientField, b: &TransientField, exec: Exec) -> Result<f64> {
    if a.n_levels() != b.n_levels() {
        return Err(BhError::ConfigInvalid("fields have different time grids".into()));
    }
    let mesh = &a.mesh;
    let dim = mesh.dim;
    let locator = PointLocator::new(&b.mesh);
    // Quadrature at the points x = (1−s)·centroid + s·vertex with s chosen
    // so that the rule is exact for quadratics.
    let s = if dim == 2 { 0.5 } else { 1.0 / 5f64.sqrt() };
    let nq = dim + 1;
    let mut points = Vec::with_capacity(mesh.n_elements() * nq);
    for e in 0..mesh.n_elements() {
        let c = mesh.element_centroid(e);
        for &v in mesh.element(e) {
            let x = mesh.vertices[v];
            let mut q = [0.0; 3];
            for d in 0..dim {
                q[d] = (1.0 - s) * c[d] + s * x[d];
            }
            points.push((e, q));
        }
    }
    let located: Vec<Result<(usize, [f64; 4])>> = par::map_slice(exec, &points, |(_, q)| locator.locate(q));
    let located: Vec<(usize, [f64; 4])> = located.into_iter().collect::<Result<_>>()?;
    let own: Vec<[f64; 4]> = points.iter().map(|(e, q)| locate::barycentric(mesh, *e, q)).collect();
    let sq: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(ua, ub)| {
            let mut s = 0.0;
            for (i, (e, _)) in points.iter().enumerate() {
                let va: f64 = mesh.element(*e).iter().zip(&own[i]).map(|(&p, w)| w * ua[p]).sum();
                let (eb, wb) = located[i];
                let vb: f64 = b.mesh.element(eb).iter().zip(&wb).map(|(&p, w)| w * ub[p]).sum();
                s += mesh.element_volume(*e) / nq as f64 * (va - vb).powi(2);
            }
            s
        })
        .collect();
    Ok(trapezoid(&a.times, &sq).sqrt())
}

/// One row of an ε- or η-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    /// ε for ε-sweeps, η for η-sweeps.
    pub param: f64,
    pub error_l2: f64,
    pub energy_bulk: f64,
    pub energy_surface: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub label: String,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    /// Rows are sorted so the parameter decreases; the verdict asks for a
    /// strictly decreasing error along that order.
    pub fn new(label: impl Into<String>, mut rows: Vec<StudyRow>) -> Self {
        rows.sort_by(|a, b| b.param.total_cmp(&a.param));
        StudyReport {
            label: label.into(),
            rows,
        }
    }

    pub fn monotone_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error_l2 < w[0].error_l2)
    }
}

/// What each micro solution is compared against.
pub enum Reference<'a> {
    /// The homogenized solution (error ‖M_ε(u_ε) − u‖).
    Macro(&'a MacroSolution),
    /// Zero limit (error ‖u_ε‖).
    Zero,
}

/// Runs `solve_micro` for every mesh (typically one per ε) and measures the
/// distance to the reference. Runs execute in parallel; each run is
/// sequential in time.
pub fn convergence_study(label: &str, runs: &[MicroRun], reference: Reference, exec: Exec) -> Result<StudyReport> {
    let rows: Vec<Result<StudyRow>> = par::map_slice(exec, runs, |run| {
        let start = Instant::now();
        let sol = solve_micro(run)?;
        let error_l2 = match &reference {
            Reference::Zero => sol.field.l2_space_time(&mass_matrix(
                &run.micro.mesh,
                &DofMap::identity(run.micro.mesh.n_vertices()),
                run.exec,
            )),
            Reference::Macro(m) => {
                let avg = local_average(&sol.field, &run.micro);
                cellwise_l2_distance(&avg, run.micro.n, &m.field)?
            }
        };
        Ok(StudyRow {
            param: run.micro.eps,
            error_l2,
            energy_bulk: sol.energy_bulk,
            energy_surface: sol.energy_surface,
            runtime_s: start.elapsed().as_secs_f64(),
        })
    });
    Ok(StudyReport::new(label, rows.into_iter().collect::<Result<_>>()?))
}

/// η-sweep: distance of each membrane solution to the concentrated one.
pub fn concentration_study(concentrated: &MicroSolution, runs: &[MembraneRun], exec: Exec) -> Result<StudyReport> {
    let rows: Vec<Result<StudyRow>> = par::map_slice(exec, runs, |run| {
        let start = Instant::now();
        let sol = solve_membrane(run)?;
        let error_l2 = cross_mesh_l2_distance(&concentrated.field, &sol.field, run.exec)?;
        Ok(StudyRow {
            param: run.eta,
            error_l2,
            energy_bulk: sol.energy_bulk,
            energy_surface: sol.energy_surface,
            runtime_s: start.elapsed().as_secs_f64(),
        })
    });
    Ok(StudyReport::new("eta", rows.into_iter().collect::<Result<_>>()?))
}
