use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfgError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid exponent p = {0}; expected p >= 1 or infinity")]
    InvalidExponent(f64),
    #[error("negative duration {0}")]
    NegativeTime(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("density has value {value:e} at node {node}, below the roundoff floor")]
    NegativeDensity { node: usize, value: f64 },
    #[error("CFL violated: number {cfl:.4} exceeds factor {limit:.4} (max drift {max_drift:.4e})")]
    Cfl { cfl: f64, limit: f64, max_drift: f64 },
    #[error("mass drift {0:e} exceeds 1e-10")]
    MassDrift(f64),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("legendre maximization did not converge at node {node}")]
    LegendreNoConvergence { node: usize },
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, MfgError>;
