use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh file line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("inverted element {element}: jacobian {jacobian:e} at node {node}")]
    InvertedElement {
        element: usize,
        node: usize,
        jacobian: f64,
    },

    #[error("element {element}: mapping order {mapping} exceeds polynomial order {order:?}")]
    MappingOrderTooHigh {
        element: usize,
        mapping: usize,
        order: [usize; 2],
    },

    #[error("diverged state in element {element} on level {level}")]
    Diverged { element: usize, level: usize },

    #[error("no time scale: zero wave speed and zero viscosity")]
    NoTimeScale,

    #[error("order {order} below the coarsest admissible order {min}")]
    OrderTooLow { order: usize, min: usize },

    #[error("insufficient convergence for estimation: residual {residual:e} above {threshold:e}")]
    InsufficientConvergence { residual: f64, threshold: f64 },

    #[error("multigrid stalled on level {level} after {cycles} cycles: residual {residual:e} (was {previous:e})")]
    Stalled {
        level: usize,
        cycles: usize,
        residual: f64,
        previous: f64,
    },

    #[error("V-cycle limit of {cycles} reached with residual {residual:e}")]
    CycleLimit { cycles: usize, residual: f64 },

    #[error("empty truncation error map for element {0}")]
    EmptyMap(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
