use thiserror::Error;

/// Errors raised by the subgpr toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent arguments.
    #[error("input error: {0}")]
    Input(String),
    /// A problem too large for an exact routine.
    #[error("size error: {0}")]
    Size(String),
    /// Malformed text input, with the 1-based line it occurred on.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// Factorization or decomposition failure.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The operation only supports some kernel families.
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
