use thiserror::Error;

/// Errors raised by the solver, the numeric kernels and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric kernel hit its iteration or refinement cap before reaching tolerance.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// A numerically constructed object failed validation.
    #[error("construction error: {0}")]
    Construction(String),

    /// Root bracketing or a similar global search failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A payoff limit could not be classified by probing.
    #[error("indeterminate: {0}")]
    Indeterminate(String),

    /// Invalid simulation or run configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
