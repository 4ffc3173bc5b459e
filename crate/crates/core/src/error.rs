use std::io;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),
    #[error("unknown collector `{0}`")]
    UnknownCollector(String),
    #[error("cannot step past the horizon (t = {t}, horizon = {horizon})")]
    PastHorizon { t: usize, horizon: usize },
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("variable does not belong to this computation record")]
    Unrecorded,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("buffer is empty")]
    EmptyBuffer,
    #[error("wrong buffer size: expected {expected}, got {actual}")]
    BufferSize { expected: usize, actual: usize },
    #[error("demonstration set is empty")]
    EmptyDemoSet,
    #[error("expert acceptance rate too low ({accepted}/{attempted} episodes kept)")]
    ExpertBroken { accepted: usize, attempted: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(context: &'static str, expected: impl ToString, actual: impl ToString) -> Error {
    Error::Shape {
        context,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
