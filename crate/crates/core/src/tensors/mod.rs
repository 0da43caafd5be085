//! Effective tensors λ₀, A⁰, B⁰(t), C⁰, the source coefficients Φ(t) and
//! the homogenized matrices of the k < 1 and k > 1 regimes. Every tensor is
//! evaluated through two independent formulas and the discrepancy kept.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cell::{CellFunctionSet, CellProblem, Evolution};
use crate::error::{BhError, Result};
use crate::fem::assemble::{bulk_gradient_integral, facet_gradient, surface_gradient_integral};
use crate::fem::Coeffs;
use crate::geometry::{GeometryKind, Phase};
use crate::par;

pub type Mat3 = [[f64; 3]; 3];

/// A tensor from its defining formula and from an independent one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualForm {
    pub primary: Mat3,
    pub alternate: Mat3,
    pub discrepancy: f64,
}

impl DualForm {
    pub fn new(dim: usize, primary: Mat3, alternate: Mat3) -> Self {
        DualForm {
            primary,
            alternate,
            discrepancy: max_diff(dim, &primary, &alternate),
        }
    }
}

pub fn max_diff(dim: usize, a: &Mat3, b: &Mat3) -> f64 {
    let mut m = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn max_entry(dim: usize, a: &Mat3) -> f64 {
    max_diff(dim, a, &[[0.0; 3]; 3])
}

/// max |M − Mᵀ|
pub fn asymmetry(dim: usize, a: &Mat3) -> f64 {
    let mut m = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            m = m.max((a[i][j] - a[j][i]).abs());
        }
    }
    m
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(dim: usize, a: &Mat3) -> Vec<f64> {
    let m = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn add_scaled_identity(dim: usize, a: &Mat3, s: f64) -> Mat3 {
    let mut m = *a;
    for i in 0..dim {
        m[i][i] += s;
    }
    m
}

/// λ₀ = λ_int|E_int| + λ_out|E_out|
pub fn compute_lambda0(problem: &CellProblem) -> f64 {
    let mesh = &problem.cell.mesh;
    let m = problem.material;
    m.lambda_int * mesh.phase_volume(Phase::Int) + m.lambda_out * mesh.phase_volume(Phase::Out)
}

impl CellProblem<'_> {
    /// Σ_f |f| avg_f(x) ν_f scaled by the facet's coefficient jump [λ].
    fn jump_trace_integral(&self, x: &[f64]) -> [f64; 3] {
        let mesh = &self.cell.mesh;
        let coeffs = self.coeffs();
        let mut out = [0.0; 3];
        for f in 0..self.surf.n_facets() {
            let (lo, hi) = self.surf.adjacent[f];
            let jump = coeffs.get(mesh.phases[hi]) - coeffs.get(mesh.phases[lo]);
            let verts = self.surf.facet(f);
            let avg = verts.iter().map(|&v| x[self.dofs.dof(v)]).sum::<f64>() / verts.len() as f64;
            for d in 0..3 {
                out[d] += jump * avg * self.surf.measures[f] * self.surf.normals[f][d];
            }
        }
        out
    }

    /// Volume form ∫λ∇x + α∫∇^B z and surface form ∫_Γ {α∇^B z − [λ] x ν}
    /// of one tensor column (x: bulk field, z: field whose surface gradient
    /// enters).
    fn dual_column(&self, x: &[f64], z: &[f64]) -> ([f64; 3], [f64; 3]) {
        let mesh = &self.cell.mesh;
        let alpha = self.material.alpha;
        let bulk = bulk_gradient_integral(mesh, &self.dofs, &self.coeffs(), x);
        let surf = surface_gradient_integral(mesh, self.surf, &self.dofs, z);
        let jump = self.jump_trace_integral(x);
        let mut vol = [0.0; 3];
        let mut sur = [0.0; 3];
        for h in 0..3 {
            vol[h] = bulk[h] + alpha * surf[h];
            sur[h] = alpha * surf[h] - jump[h];
        }
        (vol, sur)
    }

    /// Gram matrix ∫_Y λ∇(χ^h + y_h)·∇(χ^j + y_j) dy with coefficients
    /// `coeffs` (the coordinate parts enter through the directional loads).
    fn gram(&self, fields: &[Vec<f64>], coeffs: &Coeffs) -> Mat3 {
        let mesh = &self.cell.mesh;
        let dim = self.dim();
        let k = crate::fem::bulk_stiffness(mesh, &self.dofs, coeffs, crate::Exec::Serial);
        let loads: Vec<Vec<f64>> = (0..dim)
            .map(|j| crate::fem::assemble::bulk_direction_load(mesh, &self.dofs, coeffs, j))
            .collect();
        let mut g = [[0.0; 3]; 3];
        for h in 0..dim {
            for j in 0..dim {
                let mut yy = 0.0;
                for e in 0..mesh.n_elements() {
                    if h == j {
                        yy += coeffs.get(mesh.phases[e]) * mesh.element_volume(e);
                    }
                }
                let chi_chi = k.form(&fields[h], &fields[j]);
                let cross =
                    crate::fem::sparse::dot(&fields[h], &loads[j]) + crate::fem::sparse::dot(&fields[j], &loads[h]);
                g[h][j] = yy + cross + chi_chi;
            }
        }
        g
    }
}

/// C⁰ = α∫_Γ ∇^B(χ₀ + y) dσ, against its Gram form
/// α∫_Γ ∇^B(χ^h + y_h)·∇^B(χ^j + y_j) dσ.
pub fn compute_c0(problem: &CellProblem, chi0: &[Vec<f64>]) -> DualForm {
    let mesh = &problem.cell.mesh;
    let surf = problem.surf;
    let dim = problem.dim();
    let alpha = problem.material.alpha;
    let mut direct = [[0.0; 3]; 3];
    let mut gram = [[0.0; 3]; 3];
    for f in 0..surf.n_facets() {
        let nu = surf.normals[f];
        let meas = surf.measures[f];
        let grads: Vec<[f64; 3]> = (0..dim)
            .map(|j| {
                let mut g = facet_gradient(mesh, surf, &problem.dofs, f, &chi0[j]);
                for d in 0..3 {
                    g[d] += if d == j { 1.0 } else { 0.0 } - nu[d] * nu[j];
                }
                g
            })
            .collect();
        for h in 0..dim {
            for j in 0..dim {
                direct[h][j] += alpha * meas * grads[j][h];
                gram[h][j] += alpha * meas * crate::geometry::vec::dot(&grads[h], &grads[j]);
            }
        }
    }
    DualForm::new(dim, direct, gram)
}

/// A⁰ in volume form ∫λ∇χ₀ + α∫∇^Bχ₁(0) against the surface form
/// ∫_Γ {α∇^Bχ₁(0) − [λ]χ₀⊗ν}.
pub fn compute_a0(problem: &CellProblem, chi0: &[Vec<f64>], chi1: &[Evolution]) -> DualForm {
    let dim = problem.dim();
    let mut vol = [[0.0; 3]; 3];
    let mut sur = [[0.0; 3]; 3];
    for j in 0..dim {
        let (v, s) = problem.dual_column(&chi0[j], &chi1[j].snapshots[0]);
        for h in 0..dim {
            vol[h][j] = v[h];
            sur[h][j] = s[h];
        }
    }
    DualForm::new(dim, vol, sur)
}

/// λ₀I + A⁰ against the Gram identity ∫λ∇(χ₀^h + y_h)·∇(χ₀^j + y_j).
pub fn compute_a0_gram(problem: &CellProblem, lambda0: f64, a0: &DualForm, chi0: &[Vec<f64>]) -> DualForm {
    let dim = problem.dim();
    let gram = problem.gram(chi0, &problem.coeffs());
    DualForm::new(dim, add_scaled_identity(dim, &a0.primary, lambda0), gram)
}

/// Kernel samples for the evolutions `ev` (χ₁ for B⁰, ω for Φ):
/// α∫∇^B X_t + ∫λ∇X against ∫_Γ {α∇^B X_t − [λ]X ν} at every level.
pub fn compute_kernel(problem: &CellProblem, ev: &[Evolution]) -> Vec<DualForm> {
    let dim = problem.dim();
    let levels = ev[0].n_levels();
    par::map_range(problem.exec, levels, |n| {
        let mut vol = [[0.0; 3]; 3];
        let mut sur = [[0.0; 3]; 3];
        for j in 0..dim {
            let (v, s) = problem.dual_column(&ev[j].snapshots[n], &ev[j].rate(n));
            for h in 0..dim {
                vol[h][j] = v[h];
                sur[h][j] = s[h];
            }
        }
        DualForm::new(dim, vol, sur)
    })
}

/// B⁰(t_n)
pub fn compute_b0(problem: &CellProblem, chi1: &[Evolution]) -> Vec<DualForm> {
    compute_kernel(problem, chi1)
}

/// Φ(t_n), with F(x, t) = Div(Φ(t)∇ū₀(x)).
pub fn compute_f_coeffs(problem: &CellProblem, omega: &[Evolution]) -> Vec<DualForm> {
    compute_kernel(problem, omega)
}

/// k < 1, connected/disconnected: ∫_{E_out}λ_out(I + ∇χ₀) plus the Γ term
/// with y_M = y − ∫_Y y, the flux λ_out∂_ν(χ₀ + y)^out taken in residual
/// form. Compared with the Gram matrix ∫λ∇(χ₀ + y)·∇(χ₀ + y).
pub fn compute_ahom_klt1(problem: &CellProblem, chi0: &[Vec<f64>]) -> Result<DualForm> {
    if problem.cell.spec.kind.inclusions_connected() {
        return Err(BhError::WrongGeometryClass(format!(
            "{} is connected/connected; the k < 1 limit vanishes there",
            problem.cell.spec.kind.name()
        )));
    }
    let mesh = &problem.cell.mesh;
    let dim = problem.dim();
    let out_coeffs = Coeffs::two_phase(0.0, problem.material.lambda_out);
    let mut y_mean = [0.0; 3];
    for e in 0..mesh.n_elements() {
        let c = mesh.element_centroid(e);
        for d in 0..dim {
            y_mean[d] += c[d] * mesh.element_volume(e);
        }
    }
    let out_volume = mesh.phase_volume(Phase::Out);
    let mut a = [[0.0; 3]; 3];
    for j in 0..dim {
        let bulk = bulk_gradient_integral(mesh, &problem.dofs, &out_coeffs, &chi0[j]);
        let kx = problem.k_out.mul_vec(&chi0[j]);
        // Γ vertices of an isolated inclusion are never periodic images,
        // so their coordinates are single-valued
        let mut gamma_term = [0.0; 3];
        let mut seen = vec![false; problem.n_dofs()];
        for f in 0..problem.surf.n_facets() {
            for &v in problem.surf.facet(f) {
                let p = problem.dofs.dof(v);
                if seen[p] {
                    continue;
                }
                seen[p] = true;
                let r = kx[p] + problem.k_out_loads[j][p];
                for h in 0..dim {
                    gamma_term[h] += r * (mesh.vertices[v][h] - y_mean[h]);
                }
            }
        }
        for h in 0..dim {
            let delta = if h == j {
                problem.material.lambda_out * out_volume
            } else {
                0.0
            };
            a[h][j] = delta + bulk[h] - gamma_term[h];
        }
    }
    let gram = problem.gram(chi0, &problem.coeffs());
    Ok(DualForm::new(dim, a, gram))
}

/// k > 1: ∫_Y λ(I + ∇χ̃₀), against the Gram matrix of χ̃₀.
pub fn compute_ahom_kgt1(problem: &CellProblem, chi0_tilde: &[Vec<f64>]) -> DualForm {
    let mesh = &problem.cell.mesh;
    let dim = problem.dim();
    let lambda0 = compute_lambda0(problem);
    let mut a = [[0.0; 3]; 3];
    for j in 0..dim {
        let g = bulk_gradient_integral(mesh, &problem.dofs, &problem.coeffs(), &chi0_tilde[j]);
        for h in 0..dim {
            a[h][j] = g[h] + if h == j { lambda0 } else { 0.0 };
        }
    }
    let gram = problem.gram(chi0_tilde, &problem.coeffs());
    DualForm::new(dim, a, gram)
}

/// Every effective tensor of one cell configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensors {
    pub dim: usize,
    pub kind: GeometryKind,
    pub lambda0: f64,
    pub alpha: f64,
    pub gamma_measure: f64,
    pub a0: DualForm,
    /// λ₀I + A⁰ against the Gram identity.
    pub a0_gram: DualForm,
    pub c0: DualForm,
    pub times: Vec<f64>,
    pub b0: Vec<DualForm>,
    pub phi: Vec<DualForm>,
    pub a_hom_klt1: Option<DualForm>,
    pub a_hom_kgt1: DualForm,
}

impl EffectiveTensors {
    pub fn compute(problem: &CellProblem, set: &CellFunctionSet, chi0_tilde: &[Vec<f64>]) -> Result<Self> {
        let dim = problem.dim();
        let lambda0 = compute_lambda0(problem);
        let a0 = compute_a0(problem, &set.chi0.fields, &set.chi1);
        let a0_gram = compute_a0_gram(problem, lambda0, &a0, &set.chi0.fields);
        let c0 = compute_c0(problem, &set.chi0.fields);
        let b0 = compute_b0(problem, &set.chi1);
        let phi = compute_f_coeffs(problem, &set.omega);
        let a_hom_klt1 = match compute_ahom_klt1(problem, &set.chi0.fields) {
            Ok(a) => Some(a),
            Err(BhError::WrongGeometryClass(_)) => None,
            Err(e) => return Err(e),
        };
        let a_hom_kgt1 = compute_ahom_kgt1(problem, chi0_tilde);
        Ok(EffectiveTensors {
            dim,
            kind: problem.cell.spec.kind,
            lambda0,
            alpha: problem.material.alpha,
            gamma_measure: problem.surf.total_measure(),
            a0,
            a0_gram,
            c0,
            times: set.grid.times(),
            b0,
            phi,
            a_hom_klt1,
            a_hom_kgt1,
        })
    }

    /// λ₀I + A⁰
    pub fn a_total(&self) -> Mat3 {
        add_scaled_identity(self.dim, &self.a0.primary, self.lambda0)
    }

    pub fn b0_at(&self, n: usize) -> Mat3 {
        self.b0[n].primary
    }

    /// Relative discrepancies of every two-way evaluation, named.
    pub fn discrepancies(&self) -> Vec<(String, f64)> {
        let scale_a = max_entry(self.dim, &self.a_total()).max(self.lambda0);
        let mut out = vec![
            ("A0".to_string(), self.a0.discrepancy / scale_a),
            ("lambda0I+A0 gram".to_string(), self.a0_gram.discrepancy / scale_a),
            (
                "C0".to_string(),
                self.c0.discrepancy / (self.alpha * self.gamma_measure).max(f64::MIN_POSITIVE),
            ),
        ];
        for (n, b) in self.b0.iter().enumerate() {
            let s = max_entry(self.dim, &b.primary)
                .max(max_entry(self.dim, &b.alternate))
                .max(self.lambda0);
            out.push((format!("B0(t{n})"), b.discrepancy / s));
        }
        for (n, b) in self.phi.iter().enumerate() {
            let s = max_entry(self.dim, &b.primary)
                .max(max_entry(self.dim, &b.alternate))
                .max(self.lambda0);
            out.push((format!("Phi(t{n})"), b.discrepancy / s));
        }
        if let Some(a) = &self.a_hom_klt1 {
            out.push(("Ahom_klt1".to_string(), a.discrepancy / max_entry(self.dim, &a.primary)));
        }
        out.push((
            "Ahom_kgt1".to_string(),
            self.a_hom_kgt1.discrepancy / max_entry(self.dim, &self.a_hom_kgt1.primary),
        ));
        out
    }

    /// Fails with `CrossCheckFailed` on the first discrepancy above its
    /// tolerance (1e−6 for A⁰ and C⁰, 1e−5 for the kernels).
    pub fn cross_check(&self) -> Result<()> {
        for (name, d) in self.discrepancies() {
            let tol = if name.starts_with("B0") || name.starts_with("Phi") {
                1e-5
            } else {
                1e-6
            };
            if !(d <= tol) {
                return Err(BhError::CrossCheckFailed {
                    quantity: name,
                    discrepancy: d,
                    tolerance: tol,
                });
            }
        }
        Ok(())
    }
}
