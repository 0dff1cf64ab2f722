use thiserror::Error;

/// Errors raised by the forest library.
#[derive(Debug, Error)]
pub enum CdeError {
    /// An argument fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),
    /// A training or prediction configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
    /// The data cannot be fitted (for example a constant response).
    #[error("fit error: {0}")]
    Fit(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("unsupported model format version {found} (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },
    #[error("model format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CdeError>;

impl CdeError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CdeError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CdeError::Config(msg.into())
    }
}
