use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("singular center {center:?} coincides with a grid node")]
    SingularCenter { center: Vec<f64> },

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("incompatible data: {0}")]
    Incompatible(String),

    #[error("{what} did not converge (residual {residual:e} after {iterations} iterations)")]
    NotConverged {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("requested {requested} eigenpairs but the operator has only {available}")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("insufficient Fourier coverage: {0}")]
    InsufficientCoverage(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("prerequisite failed: {0}")]
    Prerequisite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
