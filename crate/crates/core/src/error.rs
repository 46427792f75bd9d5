use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration values (dimension, horizon, deletion window, grids).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("undefined alignment: {0}")]
    UndefinedAlignment(String),

    #[error("deletion error: round {round} is not present in the gradient log")]
    MissingRound { round: usize },

    /// A rounds/summary file whose header or cells do not match the schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Wraps an error raised inside one (cell, seed) run of a sweep.
    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit status: 2 for configuration/schema problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Schema(_) | Error::MissingRound { .. } => 2,
            Error::Numeric(_) | Error::UndefinedAlignment(_) => 3,
            Error::Io(_) => 1,
            Error::Run { source, .. } => source.exit_code(),
        }
    }
}
