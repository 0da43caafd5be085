//! Implicit-Euler evolution of the coupled bulk–surface correctors.

use super::{CellProblem, TimeGrid};
use crate::error::{BhError, Result};
use crate::fem::MeanZeroSolver;

/// Factored step operator K + (α/Δt)S with the mean-zero constraint.
pub struct Stepper {
    grid: TimeGrid,
    coupling: f64,
    solver: MeanZeroSolver,
}

/// Snapshots X^n, n = 0..=M, of one evolving corrector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub snapshots: Vec<Vec<f64>>,
    /// E_n = ∫_Γ |∇^B X^n|² dσ
    pub energy: Vec<f64>,
    /// Instantaneous rate ∂_t X at t = 0 on Γ (zero off Γ).
    pub rate0: Vec<f64>,
    pub dt: f64,
}

impl Evolution {
    /// ∂_t X at t_n: the backward difference used by the stepper for n ≥ 1,
    /// the instantaneous rate at n = 0.
    pub fn rate(&self, n: usize) -> Vec<f64> {
        if n == 0 {
            return self.rate0.clone();
        }
        self.snapshots[n]
            .iter()
            .zip(&self.snapshots[n - 1])
            .map(|(a, b)| (a - b) / self.dt)
            .collect()
    }

    pub fn n_levels(&self) -> usize {
        self.snapshots.len()
    }
}

impl Stepper {
    pub fn new(problem: &CellProblem, grid: TimeGrid) -> Result<Self> {
        if !(grid.dt > 0.0) {
            return Err(BhError::SolverFailure(format!("time step {} is not positive", grid.dt)));
        }
        let coupling = problem.material.alpha / grid.dt;
        let a = problem.k.lin_comb(1.0, &problem.s, coupling);
        let solver = MeanZeroSolver::new(&a, vec![0; problem.n_dofs()], problem.w_vol.clone())
            .map_err(|e| BhError::SolverFailure(e.to_string()))?;
        Ok(Stepper { grid, coupling, solver })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Initial state: the Γ values of `trace` extended harmonically into the
    /// bulk, shifted to zero mean.
    pub fn initial_state(problem: &CellProblem, trace: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; problem.n_dofs()];
        for &p in &problem.gamma {
            x[p] = trace[p];
        }
        problem.extend(&mut x, None);
        problem.remove_mean(&mut x);
        x
    }

    /// Solves (K + (α/Δt)S) X^n = (α/Δt) S X^{n−1} for n = 1..=M.
    pub fn evolve(&self, problem: &CellProblem, trace: &[f64]) -> Result<Evolution> {
        let x0 = Self::initial_state(problem, trace);
        let alpha = problem.material.alpha;
        let kx: Vec<f64> = problem.k.mul_vec(&x0).iter().map(|v| -v / alpha).collect();
        let (rate0, _) = problem.surface_solve(&kx)?;

        let mut snapshots = Vec::with_capacity(self.grid.n_steps + 1);
        let mut energy = Vec::with_capacity(self.grid.n_steps + 1);
        energy.push(problem.s.form(&x0, &x0));
        snapshots.push(x0);
        for _ in 0..self.grid.n_steps {
            let prev = snapshots.last().unwrap();
            let rhs: Vec<f64> = problem.s.mul_vec(prev).iter().map(|v| v * self.coupling).collect();
            let (x, _) = self
                .solver
                .solve(&rhs)
                .map_err(|e| BhError::SolverFailure(e.to_string()))?;
            energy.push(problem.s.form(&x, &x));
            snapshots.push(x);
        }
        Ok(Evolution {
            snapshots,
            energy,
            rate0,
            dt: self.grid.dt,
        })
    }
}

/// W(x, y, t_n) = Σ_j ω^j(y, t_n) ∂_j ū₀(x), kept in factored form.
#[derive(Debug, Clone, Copy)]
pub struct FactoredW<'a> {
    pub omega: &'a [Evolution],
}

impl FactoredW<'_> {
    /// Nodal W at time level `n` for the macroscopic gradient `grad`.
    pub fn evaluate(&self, grad: &[f64], n: usize) -> Vec<f64> {
        let len = self.omega[0].snapshots[n].len();
        let mut w = vec![0.0; len];
        for (j, om) in self.omega.iter().enumerate() {
            if grad[j] != 0.0 {
                w.iter_mut().zip(&om.snapshots[n]).for_each(|(w, o)| *w += grad[j] * o);
            }
        }
        w
    }
}

/// Pairs the ω^j evolutions with ∇ū₀ samples.
pub fn factor_w(omega: &[Evolution]) -> FactoredW<'_> {
    FactoredW { omega }
}
