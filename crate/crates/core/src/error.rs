use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Operation not defined in the regime selected by (N, s).
    #[error("regime error: {0}")]
    Regime(String),
    #[error("singularity: {0}")]
    Singular(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Requested dimension or configuration is not supported.
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A quadrature or extrapolation failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },
}
