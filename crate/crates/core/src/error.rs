use std::path::PathBuf;

/// Errors raised by the disambiguation engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate passage id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing field: {0}")]
    MissingField(String),

    #[error("invalid template {template}: {message}")]
    Template { template: String, message: String },

    /// Transient backend failure; callers may retry.
    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("backend `{backend}` timed out")]
    Timeout { backend: String },

    /// Fatal misconfiguration (dimension mismatch, unknown backend, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index fingerprint mismatch: index built with `{index}`, provider is `{provider}`")]
    Fingerprint { index: String, provider: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether a retry of the same request could succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Backend { .. } | Error::Timeout { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
