use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("capacity exceeded: operator dimension {dim} is above the limit {limit}")]
    Capacity { dim: u128, limit: usize },

    #[error("precondition failed: {what} (defect {defect:.3e})")]
    Precondition { what: String, defect: f64 },

    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("linear algebra backend: {0}")]
    Linalg(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Capacity { .. } => "capacity",
            Error::Precondition { .. } => "precondition",
            Error::Diagnostic(_) => "diagnostic",
            Error::Linalg(_) => "linalg",
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
