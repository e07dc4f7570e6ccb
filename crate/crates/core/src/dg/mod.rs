//! Discrete fields and the DGSEM spatial operators.

mod discretization;
mod field;
mod norms;
mod operator;

pub use discretization::{Discretization, FaceGeometry};
pub use field::{NodalField, OrderField};
pub use norms::{l2_error, ERROR_QUADRATURE_POINTS};
pub use operator::{face_order, sample_on, Problem, SpatialOperator};
