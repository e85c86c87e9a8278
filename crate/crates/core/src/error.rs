use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("alpha = 1 (Besov endpoint) is not supported; alpha must lie in [0, 1)")]
    UnsupportedEndpoint,
    #[error("structural error: {0}")]
    Structural(String),
    #[error("unknown registry id `{0}`")]
    Registry(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error(
        "coverage violation at xi = {xi:?}: window sum {sum:e} below threshold (increase kmax)"
    )]
    CoverageViolation { xi: [f64; 2], sum: f64 },
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("window error: {0}")]
    Window(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("symbol error: {0}")]
    Symbol(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
