use thiserror::Error;

/// Failure of one scenario run, carrying its process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("malformed JSON: {0}")]
    MalformedJson(String),

    #[error("{0}")]
    DimensionCap(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::MalformedJson(_) => 3,
            CliError::DimensionCap(_) => 4,
        }
    }
}

impl From<qfl_core::Error> for CliError {
    fn from(e: qfl_core::Error) -> Self {
        use qfl_core::Error as E;
        match e {
            E::DimensionCap { .. } => CliError::DimensionCap(e.to_string()),
            E::Leakage { .. } | E::Unstable(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            serde_json::error::Category::Data => CliError::Validation(e.to_string()),
            serde_json::error::Category::Io => CliError::Io(e.into()),
            _ => CliError::MalformedJson(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
