use std::path::PathBuf;

use crate::flow_solver::FlowState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported polynomial degree {0} (only 1 and 2 are implemented)")]
    UnsupportedDegree(usize),

    #[error("no quadrature rule of exactness degree {0} (maximum is 6)")]
    QuadratureDegree(usize),

    #[error("BDF order {0} is outside the supported range 1..=5")]
    BdfOrder(usize),

    #[error("need {needed} history values, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("degenerate element {element}: Gram determinant {gram:e} below tolerance {tolerance:e}")]
    DegenerateElement {
        element: usize,
        gram: f64,
        tolerance: f64,
    },

    #[error("linear solver stopped after {iterations} iterations at relative residual {residual:e}")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem has no exact solution attached")]
    NoExactSolution,

    #[error("point at distance {distance} from the origin is off the sphere of radius {radius}")]
    OffSurface { distance: f64, radius: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("run aborted at t = {t}: {source}")]
    Aborted {
        t: f64,
        last_good: Box<FlowState>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
