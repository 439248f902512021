use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("unsupported function f{fid}; supported ids: {supported}")]
    UnsupportedFunction { fid: u32, supported: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context}: {message}")]
    Parse { context: String, message: String },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), message: message.into() }
    }

    /// True for errors caused by bad user input (as opposed to runtime failures).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Sampling(_) | Error::Model(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
