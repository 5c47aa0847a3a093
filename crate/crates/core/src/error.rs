use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("degenerate system (condition estimate {condition:.3e}): {context}")]
    DegenerateSystem { context: String, condition: f64 },

    #[error("training diverged at episode {episode}, step {step}: {what}")]
    Diverged { episode: usize, step: usize, what: String },

    #[error("missing key: {0}")]
    MissingKey(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
