use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hilma::Error),

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{failed} of {reps} replications failed (more than 5%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        reps: usize,
        first: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for data errors, 3 for convergence failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Csv { .. } => 2,
            CliError::Core(hilma::Error::Data(_) | hilma::Error::Domain { .. }) => 2,
            CliError::Core(hilma::Error::Convergence { .. } | hilma::Error::Boundary { .. }) => 3,
            CliError::TooManyFailures { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
