//! Vacuum field in a one-dimensional cavity with oscillating walls.
//!
//! The field is described by two phase functions `G` and `F`; the modes are
//! `psi_n = (i / sqrt(4 pi n)) [exp(-i pi n G(t + x)) - exp(-i pi n F(t - x))]`.
//! Solvers for the phase functions live in [`moore`] (exact characteristic
//! tracing), [`perturbative`] and [`rg`]; [`solution::FieldSolution`] puts
//! them behind one interface used by [`energy`] and [`photons`].

// `!(x > 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod exec;
pub mod jet;
pub mod moore;
pub mod perturbative;
pub mod photons;
pub mod quadrature;
pub mod rg;
pub mod solution;
pub mod trajectories;

pub use error::{Error, Result};
pub use solution::{Backend, FieldSolution, Phase};
pub use trajectories::{CavityConfig, MotionFamily, RegimeClass, ResonanceParams};
