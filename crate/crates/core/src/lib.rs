//! Anisotropic p-adaptive discontinuous Galerkin spectral element solver
//! for steady 2D scalar conservation laws, with a nonlinear FAS
//! p-multigrid that doubles as a truncation error estimator.

pub mod error;
pub mod mesh;
pub mod spectral;

pub use error::{Error, Result};
pub mod dg;
pub mod physics;
pub mod work;
pub mod time;
pub mod multigrid;
pub mod tau;
pub mod adaptation;
