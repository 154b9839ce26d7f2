use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate paper id `{0}`")]
    DuplicateId(String),

    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },

    #[error("unknown paper id `{0}`")]
    UnknownPaper(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input is well-formed but the requested quantity is undefined on it
    /// (zero variance, zero edges, empty sets, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("penalized system is singular: {0}")]
    Singular(String),

    #[error("window {window}: {source}")]
    Window {
        window: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("run with seed {seed}: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
