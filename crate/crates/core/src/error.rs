use thiserror::Error;

/// Failure modes shared by every construction in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Construction constants or data violate a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Some factor α_j + λ_j u reached zero; the reduced variables stop being defined.
    #[error("trajectory left the admissible domain near s = {s}")]
    DomainEscape { s: f64 },

    /// The adaptive integrator could not keep the step size above its floor.
    #[error("step size underflow at s = {s} (h = {h:e})")]
    ToleranceFailure { s: f64, h: f64 },

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    /// An iterative solver stopped before meeting its residual target.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    /// A requested target lies outside the image of the map being inverted.
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    /// The operation requires a different case of the orbit classification.
    #[error("case mismatch: {0}")]
    CaseMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
