use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Lib(#[from] seqcop::Error),

    #[error("{path}: {source}")]
    Input { path: String, source: seqcop::Error },

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 2 for anything the user can fix in the config or input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use seqcop::Error as E;
        let lib = match self {
            CliError::Config(_) => return 2,
            CliError::Io(_) => return 1,
            CliError::Lib(e) | CliError::Input { source: e, .. } => e,
        };
        match lib {
            E::InvalidKernel(_)
            | E::KernelRoleMismatch { .. }
            | E::BandwidthKernelNotSmooth(_)
            | E::InvalidWindow { .. }
            | E::InvalidArgument(_)
            | E::SampleTooSmall { .. }
            | E::NonFinite(_)
            | E::Parse { .. } => 2,
            E::DegenerateVariance(_) | E::NotPositiveSemiDefinite { .. } | E::Io(_) => 1,
        }
    }
}
