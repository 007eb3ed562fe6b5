use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lex error at byte {offset}: {message}")]
    Lex { offset: usize, message: String },

    #[error("invalid token: {0}")]
    InvalidToken(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("incomplete token: unit sequence does not end with the end-of-token marker")]
    IncompleteToken,

    #[error("unit id {id} is outside the vocabulary of size {vocab_size}")]
    UnitOutOfRange { id: u32, vocab_size: usize },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("vocabulary hash mismatch: model was built for {expected}, merge table is {found}")]
    VocabMismatch { expected: String, found: String },

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format { what, message: message.into() }
    }
}
