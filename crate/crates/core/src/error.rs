use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("trajectory diverged at t={t} (value {value})")]
    Divergence { t: usize, value: f64 },

    #[error("degenerate output: {0}")]
    Degenerate(String),

    #[error("generation failed after {attempts} attempts: {reason}")]
    Generation {
        attempts: usize,
        reason: String,
        /// Serialized recipe of the last failing attempt.
        recipe: Option<String>,
    },

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
