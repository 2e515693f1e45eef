use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel {kernel} cannot be used as a covariance function")]
    KernelRoleMismatch { kernel: String },

    #[error("kernel {0} is not twice differentiable at zero")]
    BandwidthKernelNotSmooth(String),

    #[error("estimated long-run variance term is not positive ({0})")]
    DegenerateVariance(f64),

    #[error("covariance matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid window {k}..{l} for a sample of size {n}")]
    InvalidWindow { k: usize, l: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
