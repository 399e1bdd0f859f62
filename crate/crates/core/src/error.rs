use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A document-level invariant violation, located as precisely as possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub doc_id: String,
    pub sentence: Option<usize>,
    pub message: String,
}

impl ValidationError {
    pub fn new(doc_id: &str, sentence: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.to_owned(),
            sentence,
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sentence {
            Some(s) => write!(f, "document {:?}, sentence {}: {}", self.doc_id, s, self.message),
            None => write!(f, "document {:?}: {}", self.doc_id, self.message),
        }
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid document: {0}")]
    Validation(#[from] ValidationError),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}{}: {message}", doc_id.as_deref().map(|d| format!(" (doc {d:?})")).unwrap_or_default())]
    Record {
        line: usize,
        doc_id: Option<String>,
        message: String,
    },

    #[error("sentence index {index} out of range for a document of {n_sentences} sentences")]
    Range { index: usize, n_sentences: usize },

    #[error("structural inconsistency: {0}")]
    Structure(String),

    #[error("endpoint error: {0}")]
    Endpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
