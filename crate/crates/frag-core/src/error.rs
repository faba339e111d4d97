use thiserror::Error;

/// Errors produced by parsing, generation, detection and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A log line is not valid JSON.
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },

    /// A log line is valid JSON but violates the event schema.
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },

    /// A structurally valid log violates a cross-event invariant.
    #[error("integrity violation: {0}")]
    Integrity(String),

    /// Caller misuse: bad parameters, mixed conditions, missing inputs.
    #[error("{0}")]
    Usage(String),

    /// The exhaustive oracle refuses logs beyond its size guard.
    #[error("log too large for exhaustive enumeration: {events} events (limit {limit})")]
    EnumerationLimit { events: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
