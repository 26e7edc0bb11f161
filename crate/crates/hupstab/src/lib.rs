//! Numerical laboratory for the stability of the second-order Heisenberg
//! uncertainty principle.

pub mod cli;
pub mod constants;
pub mod error;
pub mod exact_algebra;
pub mod functionals;
pub mod harmonics;
pub mod integration;
pub mod manifold;
mod special;
pub mod verify;

pub use error::{Error, Result};
pub use exact_algebra::{Parity, PolyGaussFn, PolyGaussTerm};
