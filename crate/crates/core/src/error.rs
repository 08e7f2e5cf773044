use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed corpus document at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("schema error in image {image_index}: {message}")]
    Schema { image_index: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("feature file: {0}")]
    Features(String),

    #[error("invalid decoder dimensions: {0}")]
    Dims(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("no references for candidate image `{0}`")]
    UnknownImage(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (missing files, bad documents),
    /// as opposed to failures inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Schema { .. }
                | Error::Io { .. }
                | Error::Config(_)
                | Error::Features(_)
                | Error::Dims(_)
                | Error::UnknownImage(_)
                | Error::Invalid(_)
        )
    }
}
