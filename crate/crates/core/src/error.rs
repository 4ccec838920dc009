use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid transition: {0}")]
    InvalidTransition(String),

    #[error("replay buffer holds {have} transitions, {need} required")]
    ReplayTooSmall { have: usize, need: usize },

    #[error("beta schedule already advanced {0} times (its horizon)")]
    ScheduleExhausted(u64),

    #[error("target rule {rule} needs {what}")]
    RuleMismatch { rule: &'static str, what: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corrupt run log {path}: {reason}")]
    CorruptLog { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// True for errors caused by user-supplied configuration rather than a failure at run time.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
