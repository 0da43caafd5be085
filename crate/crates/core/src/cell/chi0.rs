//! Staged solution of the stationary corrector χ₀^j.

use nalgebra::{DMatrix, DVector};

use super::{CellProblem, Compatibility};
use crate::error::{BhError, Result};

/// Surface-problem solvability tolerance relative to |Γ_i|.
const SURFACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Chi0 {
    /// χ₀^j as periodic dof vectors, mean zero.
    pub fields: Vec<Vec<f64>>,
    /// Per-component constants c_i chosen by the flux condition (c_0 = 0
    /// before the final mean shift).
    pub constants: Vec<Vec<f64>>,
    /// ∫_{Γ_i} (∇χ₀^j)^out·ν dσ, indexed `[j][i]`.
    pub out_flux: Vec<Vec<f64>>,
}

impl CellProblem<'_> {
    /// Unit lifting U_i: 1 on Γ_i, 0 on the other components, harmonic in
    /// the bulk.
    fn unit_lifting(&self, i: usize) -> Vec<f64> {
        let mut u = vec![0.0; self.n_dofs()];
        for &p in &self.gamma {
            if self.gamma_comp[p] == Some(i) {
                u[p] = 1.0;
            }
        }
        self.extend(&mut u, None);
        u
    }

    /// χ₀^j for every direction:
    /// 1. surface problem S χ = −s_j on each Γ_i (mean zero per component);
    /// 2. bulk extension with that trace, in both phases at once since Γ
    ///    separates them;
    /// 3. per-component constants from the zero out-flux conditions, using
    ///    unit liftings (the m×m system has rank m−1, c_0 is pinned);
    /// 4. global shift to zero mean.
    pub fn solve_chi0(&self) -> Result<Chi0> {
        let m = self.n_components();
        let lift: Vec<Vec<f64>> = (0..m).map(|i| self.unit_lifting(i)).collect();
        let lift_flux: Vec<Vec<f64>> = lift.iter().map(|u| self.out_flux(u, None)).collect();
        let mut out = Chi0 {
            fields: vec![],
            constants: vec![],
            out_flux: vec![],
        };
        for j in 0..self.dim() {
            let rhs: Vec<f64> = self.s_loads[j].iter().map(|v| -v).collect();
            let (mut x, mu) = self.surface_solve(&rhs)?;
            for (i, &mu_i) in mu.iter().enumerate() {
                if mu_i.abs() > SURFACE_TOL {
                    return Err(BhError::ComponentSingular {
                        component: i,
                        defect: mu_i * self.comp_measure[i],
                    });
                }
            }
            self.extend(&mut x, Some(&self.k_loads[j]));
            let f0 = self.corrector_out_flux(&x, j);
            let c = self.lifting_constants(&lift_flux, &f0)?;
            for (i, ci) in c.iter().enumerate() {
                if *ci != 0.0 {
                    x.iter_mut().zip(&lift[i]).for_each(|(x, u)| *x += ci * u);
                }
            }
            self.remove_mean(&mut x);
            out.out_flux.push(self.corrector_out_flux(&x, j));
            out.fields.push(x);
            out.constants.push(c);
        }
        Ok(out)
    }

    /// Solves Σ_i c_i F_k(U_i) = −F_k(χ) for k = 1..m−1 with c_0 = 0 and
    /// checks the dropped equation.
    fn lifting_constants(&self, lift_flux: &[Vec<f64>], f0: &[f64]) -> Result<Vec<f64>> {
        let m = f0.len();
        let mut c = vec![0.0; m];
        if m > 1 {
            let a = DMatrix::from_fn(m - 1, m - 1, |k, i| lift_flux[i + 1][k + 1]);
            let b = DVector::from_fn(m - 1, |k, _| -f0[k + 1]);
            let sol = a.lu().solve(&b).ok_or(BhError::ComponentSingular {
                component: 0,
                defect: f64::NAN,
            })?;
            for i in 1..m {
                c[i] = sol[i - 1];
            }
        }
        let residual: f64 = f0[0] + (1..m).map(|i| c[i] * lift_flux[i][0]).sum::<f64>();
        if residual.abs() > 1e-8 * self.comp_measure[0] {
            return Err(BhError::ComponentSingular {
                component: 0,
                defect: residual,
            });
        }
        Ok(c)
    }

    /// v_j: α S v = [λ∇(y_j + χ₀^j)·ν] on Γ, mean zero per component. The
    /// flux bracket is taken in residual form, g_p = −(Kχ + k_j)_p.
    /// Returns v (zero off Γ) and the per-component mean of the right-hand
    /// side divided by α.
    pub fn solve_v_init(&self, chi0: &[f64], j: usize, mode: Compatibility) -> Result<(Vec<f64>, Vec<f64>)> {
        let kx = self.k.mul_vec(chi0);
        let alpha = self.material.alpha;
        let g: Vec<f64> = kx.iter().zip(&self.k_loads[j]).map(|(a, b)| -(a + b) / alpha).collect();
        let (v, mu) = self.surface_solve(&g)?;
        if mode == Compatibility::Strict {
            let tol = 1e-8 * self.material.lambda_max() / alpha;
            for (i, &mu_i) in mu.iter().enumerate() {
                if mu_i.abs() > tol {
                    return Err(BhError::CompatibilityViolated {
                        component: i,
                        defect: mu_i * alpha * self.comp_measure[i],
                        tolerance: tol * alpha * self.comp_measure[i],
                    });
                }
            }
        }
        Ok((v, mu))
    }
}
