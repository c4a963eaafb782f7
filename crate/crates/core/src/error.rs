use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("symbol `{name}` is not finite at t = {t}, xi = {xi:?}")]
    SymbolEvaluation { name: String, t: f64, xi: Vec<f64> },

    #[error("multiplier is not finite at xi = {xi:?}")]
    Multiplier { xi: Vec<f64> },

    #[error("time quadrature did not converge (worst relative change {worst_change:e} at xi = {xi:?})")]
    Quadrature { worst_change: f64, xi: Vec<f64> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("audit error: {0}")]
    Audit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time window error: {0}")]
    Window(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("malformed field data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
