//! Calculus of variations on truncated locally convex spaces: weighted-sup
//! seminorm models, extremal solvers, Legendre and Jacobi analysis, symmetry
//! detection and Noether first integrals.

pub mod banded;
pub mod catalog;
pub mod cli;
pub mod curves;
pub mod differentiation;
pub mod dsl;
pub mod error;
pub mod euler_lagrange;
pub mod lcs_model;
pub mod legendre_jacobi;
pub mod symmetry_noether;

pub use error::{Error, Result};
