use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error(transparent)]
    Core(#[from] weaklg_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn validation(key: &str, message: impl Into<String>) -> Self {
        Self::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 validation, 2 verification failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } | Self::Validation { .. } | Self::Core(_) => 1,
            Self::Verification(_) => 2,
            Self::Io { .. } | Self::Csv { .. } => 3,
        }
    }
}
