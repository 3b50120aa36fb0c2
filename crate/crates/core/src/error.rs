use thiserror::Error;

/// Errors raised anywhere in the engine, the verifier or the file formats.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Caller supplied a malformed value (bad interval, bad density, bad target).
    #[error("input error: {0}")]
    Input(String),
    /// A query was made whose precondition the caller is responsible for.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An invariant the protocol guarantees did not hold. Always an engine bug.
    #[error("protocol error at {step}: {message}")]
    Protocol { step: String, message: String },
    /// A file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn protocol(step: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Protocol {
            step: step.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
