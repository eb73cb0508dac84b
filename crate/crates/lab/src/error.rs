use std::path::PathBuf;

use snls_core::Error as CoreError;

/// Process exit codes of the `snls` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const HYPOTHESIS: i32 = 3;
    pub const NON_CONTRACTION: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } => exit::CONFIG,
            LabError::Core(e) => match e {
                CoreError::InvalidGrid(_)
                | CoreError::GridMismatch(_)
                | CoreError::InvalidParameter { .. }
                | CoreError::BeyondHorizon { .. } => exit::CONFIG,
                CoreError::Hypothesis(_)
                | CoreError::Degenerate(_)
                | CoreError::OutsideFidelityWindow { .. }
                | CoreError::NonPositiveData(_)
                | CoreError::NotEnoughData { .. } => exit::HYPOTHESIS,
                CoreError::ExistenceHorizonExceeded { .. } => exit::NON_CONTRACTION,
            },
            LabError::Io { .. } | LabError::Format { .. } | LabError::Pool(_) => exit::FAILURE,
        }
    }
}
