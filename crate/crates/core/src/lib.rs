//! Numerical homogenization of electrical conduction in composites whose
//! phases are separated by a membrane with a dynamic Laplace-Beltrami
//! interface condition.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds interface-fitted periodic cell meshes, ε-tilings of
//!   the unit square/cube and thick-membrane variants.
//! * [`fem`] holds the P1 machinery: bulk and tangential stiffness assembly,
//!   periodic dof identification and constrained sparse solves.
//! * [`cell`] solves the cell problems (stationary corrector, initial surface
//!   datum, evolving correctors).
//! * [`tensors`] turns cell functions into the effective tensors and
//!   cross-checks every tensor through two independent formulas.
//! * [`macroscale`] integrates the homogenized pseudo-parabolic problem with
//!   memory and the elliptic limits.
//! * [`micro`] solves the ε-scale and membrane problems directly and measures
//!   convergence toward the homogenized solution.
//! * [`config`], [`pipeline`] and [`verify`] wire everything into
//!   reproducible runs.

// Index loops mirror the tensor notation; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod config;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod macroscale;
pub mod micro;
pub mod par;
pub mod pipeline;
pub mod presets;
pub mod tensors;
pub mod verify;

pub use error::{BhError, Result};
pub use par::Exec;
