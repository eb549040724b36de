//! Error type shared across the crate.

use std::path::PathBuf;

/// Errors surfaced by dataset handling, factorization, and metrics.
#[derive(Debug, thiserror::Error)]
pub enum HmcdError {
    /// Arguments or data violate a documented precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A dataset file could not be parsed.
    #[error("{path}:{}: {message}", line.map_or_else(|| "?".into(), |l| l.to_string()))]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    /// The solver produced a non-finite value or otherwise lost its footing.
    #[error("solver failed at outer iteration {iteration}: {message}")]
    Solver { iteration: usize, message: String },

    /// The requested metric has no defined value on this input.
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, HmcdError>;

impl HmcdError {
    pub fn input(message: impl Into<String>) -> Self {
        HmcdError::Input(message.into())
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        HmcdError::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
