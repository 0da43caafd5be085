//! Cell problems on the periodic unit cell: the stationary corrector χ₀,
//! the initial surface datum v_j, the evolving correctors χ₁^j(t) and ω^j(t)
//! (the factor of W), and the perfect-contact corrector χ̃₀.

mod chi0;
mod evolve;

use serde::{Deserialize, Serialize};

pub use chi0::Chi0;
pub use evolve::{factor_w, Evolution, FactoredW, Stepper};

use crate::error::Result;
use crate::fem::assemble::{
    bulk_direction_load, bulk_stiffness, surface_direction_load, surface_weights, volume_weights,
};
use crate::fem::{assemble_bulk_stiffness, assemble_surface_stiffness, Cholesky, Coeffs, Csr, DofMap, MeanZeroSolver};
use crate::geometry::{CellMesh, SurfaceMesh};
use crate::par::{self, Exec};

/// Uniform kernel time grid `t_n = n·dt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Grid covering `[0, horizon]` with step `dt` (rounded to a whole
    /// number of steps).
    pub fn new(horizon: f64, dt: f64) -> Self {
        TimeGrid {
            dt,
            n_steps: ((horizon / dt).round() as usize).max(1),
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| self.time(n)).collect()
    }
}

/// How the per-component solvability of the v_j surface problem is
/// handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compatibility {
    /// Reject a right-hand side whose per-component integral exceeds the
    /// tolerance.
    Strict,
    /// Remove the per-component mean of the right-hand side.
    Project,
}

/// Material data of a cell problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda_int: f64,
    pub lambda_out: f64,
    pub alpha: f64,
}

impl Material {
    pub fn new(lambda_int: f64, lambda_out: f64, alpha: f64) -> Self {
        Material {
            lambda_int,
            lambda_out,
            alpha,
        }
    }

    pub fn coeffs(&self) -> Coeffs {
        Coeffs::two_phase(self.lambda_int, self.lambda_out)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_int.max(self.lambda_out)
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_int.min(self.lambda_out)
    }
}

/// Operators and index sets shared by all cell problems on one mesh.
pub struct CellProblem<'a> {
    pub cell: &'a CellMesh,
    pub surf: &'a SurfaceMesh,
    pub material: Material,
    pub exec: Exec,
    pub dofs: DofMap,
    /// ∫ λ ∇φ_p·∇φ_q over both phases.
    pub k: Csr,
    /// The same restricted to the outer phase.
    pub k_out: Csr,
    /// Tangential stiffness on Γ (without α).
    pub s: Csr,
    pub w_vol: Vec<f64>,
    pub w_surf: Vec<f64>,
    /// Component of every Γ dof, `None` off Γ.
    pub gamma_comp: Vec<Option<usize>>,
    /// Γ dofs in increasing order.
    pub gamma: Vec<usize>,
    /// Non-Γ dofs in increasing order.
    pub interior: Vec<usize>,
    /// |Γ_i|
    pub comp_measure: Vec<f64>,
    /// ∫_{Γ_i} ν dσ
    pub comp_normal_integral: Vec<[f64; 3]>,
    pub(crate) k_loads: Vec<Vec<f64>>,
    pub(crate) k_out_loads: Vec<Vec<f64>>,
    pub(crate) s_loads: Vec<Vec<f64>>,
    interior_solver: Cholesky,
    surface_solver: MeanZeroSolver,
}

impl<'a> CellProblem<'a> {
    pub fn new(cell: &'a CellMesh, surf: &'a SurfaceMesh, material: Material, exec: Exec) -> Result<Self> {
        let mesh = &cell.mesh;
        let dim = mesh.dim;
        if !(material.alpha > 0.0) {
            return Err(crate::BhError::NonpositiveCoefficient {
                name: "alpha",
                value: material.alpha,
            });
        }
        let dofs = DofMap::periodic(mesh);
        let coeffs = material.coeffs();
        let k = assemble_bulk_stiffness(mesh, &dofs, &coeffs, exec)?;
        let out_only = Coeffs::two_phase(0.0, material.lambda_out);
        let k_out = bulk_stiffness(mesh, &dofs, &out_only, exec);
        let s = assemble_surface_stiffness(mesh, surf, &dofs, exec)?;
        let w_vol = volume_weights(mesh, &dofs);
        let w_surf = surface_weights(surf, &dofs);

        let mut gamma_comp = vec![None; dofs.n_dofs];
        for f in 0..surf.n_facets() {
            for &v in surf.facet(f) {
                gamma_comp[dofs.dof(v)] = Some(surf.components[f]);
            }
        }
        let gamma: Vec<usize> = (0..dofs.n_dofs).filter(|&p| gamma_comp[p].is_some()).collect();
        let interior: Vec<usize> = (0..dofs.n_dofs).filter(|&p| gamma_comp[p].is_none()).collect();
        let comp_measure = surf.component_measures();
        let mut comp_normal_integral = vec![[0.0; 3]; surf.n_components];
        for f in 0..surf.n_facets() {
            let c = surf.components[f];
            for d in 0..3 {
                comp_normal_integral[c][d] += surf.measures[f] * surf.normals[f][d];
            }
        }
        let k_loads = (0..dim).map(|j| bulk_direction_load(mesh, &dofs, &coeffs, j)).collect();
        let k_out_loads = (0..dim)
            .map(|j| bulk_direction_load(mesh, &dofs, &out_only, j))
            .collect();
        let s_loads = (0..dim).map(|j| surface_direction_load(mesh, surf, &dofs, j)).collect();

        let interior_solver = Cholesky::factor(&k.submatrix(&interior))?;
        let groups: Vec<usize> = gamma.iter().map(|&p| gamma_comp[p].unwrap()).collect();
        let weights: Vec<f64> = gamma.iter().map(|&p| w_surf[p]).collect();
        let surface_solver = MeanZeroSolver::new(&s.submatrix(&gamma), groups, weights)?;

        Ok(CellProblem {
            cell,
            surf,
            material,
            exec,
            dofs,
            k,
            k_out,
            s,
            w_vol,
            w_surf,
            gamma_comp,
            gamma,
            interior,
            comp_measure,
            comp_normal_integral,
            k_loads,
            k_out_loads,
            s_loads,
            interior_solver,
            surface_solver,
        })
    }

    pub fn dim(&self) -> usize {
        self.cell.mesh.dim
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs
    }

    pub fn n_components(&self) -> usize {
        self.surf.n_components
    }

    pub fn coeffs(&self) -> Coeffs {
        self.material.coeffs()
    }

    /// Fills the non-Γ dofs of `x` (Γ values kept) by solving the bulk
    /// problem K_II x_I = −K_IΓ x_Γ − load_I.
    pub fn extend(&self, x: &mut [f64], load: Option<&[f64]>) {
        let on_gamma: Vec<bool> = self.gamma_comp.iter().map(|c| c.is_some()).collect();
        let coupling = self.k.block_mul(&self.interior, &on_gamma, x);
        let rhs: Vec<f64> = self
            .interior
            .iter()
            .zip(&coupling)
            .map(|(&p, c)| -c - load.map_or(0.0, |l| l[p]))
            .collect();
        let y = self.interior_solver.solve(&rhs);
        for (&p, v) in self.interior.iter().zip(y) {
            x[p] = v;
        }
    }

    /// Solves the per-component surface problem S u = b on Γ (b given on
    /// all dofs, only Γ entries used), mean zero per component with surface
    /// weights. Returns u on all dofs (zero off Γ) and the per-component
    /// multipliers b̄_i = ∫_{Γ_i} b / |Γ_i| that were removed.
    pub fn surface_solve(&self, b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let rhs: Vec<f64> = self.gamma.iter().map(|&p| b[p]).collect();
        let (y, mu) = self.surface_solver.solve(&rhs)?;
        let mut x = vec![0.0; self.n_dofs()];
        for (&p, v) in self.gamma.iter().zip(y) {
            x[p] = v;
        }
        Ok((x, mu))
    }

    /// Shifts `x` so that ∫_Y x dy = 0.
    pub fn remove_mean(&self, x: &mut [f64]) {
        let total: f64 = self.w_vol.iter().sum();
        let m: f64 = self.w_vol.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() / total;
        x.iter_mut().for_each(|v| *v -= m);
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.w_vol.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() / self.w_vol.iter().sum::<f64>()
    }

    /// Out-phase flux ∫_{Γ_i} ∇(x + y_j)^out·ν dσ per component, in the
    /// variationally consistent (residual) form. `j = None` drops y_j.
    pub fn out_flux(&self, x: &[f64], j: Option<usize>) -> Vec<f64> {
        let kx = self.k_out.mul_vec(x);
        let mut flux = vec![0.0; self.n_components()];
        for &p in &self.gamma {
            let load = j.map_or(0.0, |j| self.k_out_loads[j][p]);
            flux[self.gamma_comp[p].unwrap()] -= (kx[p] + load) / self.material.lambda_out;
        }
        flux
    }

    /// Out-phase flux of x alone, ∫_{Γ_i} (∇x)^out·ν dσ.
    pub fn corrector_out_flux(&self, x: &[f64], j: usize) -> Vec<f64> {
        let mut f = self.out_flux(x, Some(j));
        for (i, v) in f.iter_mut().enumerate() {
            *v -= self.comp_normal_integral[i][j];
        }
        f
    }

    /// Perfect-contact corrector: −Div(λ∇(y_j + χ̃)) = 0 in Y, mean zero.
    pub fn solve_chi0_tilde(&self) -> Result<Vec<Vec<f64>>> {
        let solver = MeanZeroSolver::new(&self.k, vec![0; self.n_dofs()], self.w_vol.clone())?;
        (0..self.dim())
            .map(|j| {
                let b: Vec<f64> = self.k_loads[j].iter().map(|v| -v).collect();
                solver.solve(&b).map(|(x, _)| x)
            })
            .collect()
    }
}

/// All cell functions for one geometry and material.
#[derive(Debug, Clone)]
pub struct CellFunctionSet {
    pub chi0: Chi0,
    /// v_j on Γ (zero off Γ).
    pub v: Vec<Vec<f64>>,
    /// Per-component mean of the v_j right-hand side that was projected out
    /// (zero up to round-off in `Strict` mode).
    pub v_defect: Vec<Vec<f64>>,
    pub chi1: Vec<Evolution>,
    pub omega: Vec<Evolution>,
    pub grid: TimeGrid,
}

/// Solves χ₀, v, χ₁ and ω for every direction.
pub fn solve_cell_functions(problem: &CellProblem, grid: TimeGrid, mode: Compatibility) -> Result<CellFunctionSet> {
    let chi0 = problem.solve_chi0()?;
    let dim = problem.dim();
    let mut v = Vec::with_capacity(dim);
    let mut v_defect = Vec::with_capacity(dim);
    for j in 0..dim {
        let (vj, d) = problem.solve_v_init(&chi0.fields[j], j, mode)?;
        v.push(vj);
        v_defect.push(d);
    }
    let stepper = Stepper::new(problem, grid)?;
    let traces: Vec<Vec<f64>> = v
        .iter()
        .cloned()
        .chain(chi0.fields.iter().map(|c| c.iter().map(|x| -x).collect()))
        .collect();
    let evolutions: Vec<Result<Evolution>> = par::map_slice(problem.exec, &traces, |t| stepper.evolve(problem, t));
    let mut evolutions = evolutions.into_iter().collect::<Result<Vec<_>>>()?;
    let omega = evolutions.split_off(dim);
    Ok(CellFunctionSet {
        chi0,
        v,
        v_defect,
        chi1: evolutions,
        omega,
        grid,
    })
}
