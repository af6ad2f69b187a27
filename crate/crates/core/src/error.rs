use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no column named `{column}` in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: {message}")]
    BadRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: byte offset {offset}: {message}")]
    BadBinary {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("no users left after preprocessing")]
    EmptyDataset,

    #[error("user `{user}` has {len} interactions; the leave-one-out split needs at least 3")]
    SequenceTooShort { user: String, len: usize },

    #[error("embedding dimension mismatch for `{item}`: expected {expected}, found {found}")]
    DimensionMismatch {
        item: String,
        expected: usize,
        found: usize,
    },

    #[error("item `{0}` has no embedding")]
    MissingEmbedding(String),

    #[error("unknown user `{0}` in prediction file")]
    UnknownUser(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("embeddings must be L2-normalized before scoring")]
    NotNormalized,

    #[error("BPR training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model `{model}` failed for user `{user}`: {message}")]
    ModelFailure {
        model: String,
        user: String,
        message: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Stage { source, .. } => source.kind(),
            Error::NotNormalized | Error::Json(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
