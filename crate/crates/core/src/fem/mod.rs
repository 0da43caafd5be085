//! P1 finite elements on interface-fitted simplicial meshes.

pub mod assemble;
pub mod dofs;
pub mod solve;
pub mod sparse;

use serde::{Deserialize, Serialize};

pub use assemble::{
    assemble_bulk_stiffness, assemble_surface_stiffness, bulk_stiffness, mass_matrix, matrix_stiffness,
    surface_flux_jump,
};
pub use dofs::DofMap;
pub use solve::{Cholesky, DirichletSolver, MeanZeroSolver, Method};
pub use sparse::Csr;

use crate::geometry::Phase;

/// Per-phase scalar coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coeffs {
    pub int: f64,
    pub membrane: f64,
    pub out: f64,
}

impl Coeffs {
    pub fn two_phase(int: f64, out: f64) -> Self {
        Coeffs {
            int,
            membrane: 0.0,
            out,
        }
    }

    pub fn uniform(v: f64) -> Self {
        Coeffs {
            int: v,
            membrane: v,
            out: v,
        }
    }

    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Int => self.int,
            Phase::Membrane => self.membrane,
            Phase::Out => self.out,
        }
    }
}
