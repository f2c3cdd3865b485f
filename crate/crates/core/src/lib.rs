//! Monte Carlo approximation of statistical solutions of the 2D
//! incompressible Navier-Stokes equations with an H(div)-conforming
//! finite-element solver, plus ensemble post-processing.

pub mod assembly;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod observables;
pub mod mesh;
pub mod par;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod sparse;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
