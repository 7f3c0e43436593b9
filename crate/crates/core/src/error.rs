use crate::field::ScalarField;
use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Last state of a solve that did not reach its tolerance.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub report: SolveReport,
    pub last_iterate: ScalarField,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("grid too small: axis {axis} has {nodes} nodes, at least 3 are required")]
    GridTooSmall { axis: usize, nodes: usize },

    #[error("exponent p = {0} is not supported (need 2 <= p < inf)")]
    UnsupportedExponent(f64),

    #[error("operator produced a non-finite value at x = {x:?}, xi = {xi:?}")]
    NonFiniteOperator { x: Vec<f64>, xi: Vec<f64> },

    #[error(
        "solver did not converge after {} iterations (residual {:.3e})",
        .0.report.iterations,
        .0.report.final_residual
    )]
    NotConverged(Box<SolveFailure>),

    #[error("non-finite iterate after {} iterations", .0.report.iterations)]
    NonFiniteIterate(Box<SolveFailure>),

    #[error("oscillation unresolved on axis {axis}: {nodes_per_period:.2} nodes per period")]
    UnresolvedOscillation { axis: usize, nodes_per_period: f64 },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("malformed coefficient table: {0}")]
    Table(String),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged(_) | Error::NonFiniteIterate(_))
    }
}
