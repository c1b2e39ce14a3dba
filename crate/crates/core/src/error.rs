use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("solution left the chart at t = {t_exit}")]
    Escape { t_exit: f64 },
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("trajectories not comparable: {0}")]
    NotComparable(String),
    #[error("chart violation: {0}")]
    ChartViolation(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("map is not a contraction (observed ratio {alpha_hat})")]
    NotAContraction { alpha_hat: f64 },
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("range error: {0}")]
    Range(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("frame error: {0}")]
    Frame(String),
    #[error("spectral gap too small: {0}")]
    GapTooSmall(String),
    #[error("precondition unmet: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
