use std::io;

use thiserror::Error;

use crate::worldsim::SkillId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's input contract (shape, variant, range).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition of {skill} does not hold: {reason}")]
    Precondition { skill: SkillId, reason: String },

    #[error("grid holds {capacity} blocks but {requested} were requested")]
    Capacity { requested: usize, capacity: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("expansion failed: {0}")]
    Expansion(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
