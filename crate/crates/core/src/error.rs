//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Broad class of an error, used by callers (the CLI in particular) to map
/// failures onto exit codes: validation problems are caller mistakes,
/// runtime problems are environment or internal failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input violates a precondition (non-finite values, empty where
    /// nonempty is required, out-of-bounds pixels, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A token id outside the vocabulary.
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenRange { id: u32, vocab_size: usize },

    /// Configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// A sequence budget (context window) would be exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A feature vector with (near-)zero norm reached a cosine computation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Generation terminated immediately; there are no caption features.
    /// Callers typically skip the sample.
    #[error("degenerate generation: caption is empty")]
    DegenerateGeneration,

    /// A manifest line failed to parse or validate.
    #[error("manifest error at {path}:{line}: {message}")]
    Manifest {
        path: String,
        line: usize,
        message: String,
    },

    /// Checkpoint file is corrupt, incomplete, or does not match the
    /// requested configuration.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training aborted (non-finite gradient or similar).
    #[error("training aborted: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Classify the error for exit-code mapping.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Shape(_)
            | Error::InvalidInput(_)
            | Error::TokenRange { .. }
            | Error::Config(_)
            | Error::Capacity(_)
            | Error::DegenerateInput(_)
            | Error::DegenerateGeneration
            | Error::Manifest { .. } => ErrorClass::Validation,
            Error::Checkpoint(_) | Error::Training(_) | Error::Io(_) | Error::Json(_) => {
                ErrorClass::Runtime
            }
        }
    }
}
