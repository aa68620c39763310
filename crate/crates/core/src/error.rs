use thiserror::Error;

/// Errors produced by the library.
///
/// The variants are grouped the way the CLI maps them to exit codes:
/// configuration problems, contrast/ellipticity domain violations, and
/// numerical consistency failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contrast outside analyticity domain: {0}")]
    Domain(String),

    #[error("evaluation point {point} lies within {distance:e} of the spectral interval [0,1]")]
    PoleProximity { point: String, distance: f64 },

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical consistency failure: {0}")]
    Consistency(String),

    #[error("spectrum outside [0,1]: eigenvalue {value} (tolerance {tolerance:e})")]
    SpectrumExcursion { value: f64, tolerance: f64 },

    #[error("eigensolver did not converge: {0}")]
    Convergence(String),

    #[error("linear solver failed: {message} (condition estimate {condition:e})")]
    Solver { message: String, condition: f64 },

    #[error("degenerate measure: {0}")]
    Degenerate(String),

    #[error("infeasible moments: {0}")]
    InfeasibleMoments(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
