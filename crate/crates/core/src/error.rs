use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin quantum number: {0}")]
    InvalidSpin(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site index {site} out of range for a chain of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("Hilbert space dimension {dim} exceeds the dense limit {limit}")]
    DimensionOverflow { dim: u128, limit: usize },

    #[error("invalid system description: {0}")]
    InvalidSpec(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time step {dt} too large: dt * |H| = {product:.3} exceeds {limit}")]
    StepSize { dt: f64, product: f64, limit: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("density matrix has eigenvalue {0:e} below the clamp tolerance")]
    NegativeEigenvalue(f64),

    #[error("self-consistent step did not converge after {iterations} iterations (residual {residual:e})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("malformed config: {0}")]
    Config(String),

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::InvalidSpin(_)
            | Error::Unsupported(_)
            | Error::StepSize { .. } => 2,
            Error::DimensionOverflow { .. } => 3,
            Error::NonFinite { .. }
            | Error::NegativeEigenvalue(_)
            | Error::FixedPoint { .. }
            | Error::ZeroNorm => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
