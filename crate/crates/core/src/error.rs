use combqfi_sdp::{SdpError, SolveStatus};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("gauge error: {0}")]
    Gauge(String),
    #[error("constant-rank violation: rank {at_theta} at θ but up to {max_rank} elsewhere in the domain (samples {samples:?})")]
    ConstantRank { at_theta: usize, max_rank: usize, samples: Vec<(f64, usize)> },
    #[error("solver returned status {status}: {detail}")]
    Solver { status: SolveStatus, detail: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

pub type Result<T> = std::result::Result<T, Error>;
