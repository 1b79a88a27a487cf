use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{path}: cannot use image: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("prediction files are misaligned: {0}")]
    Alignment(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch} (samples {samples:?})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        samples: Vec<String>,
        loss: f64,
    },
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] hqcnn_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// Process exit status: 1 usage, 2 data, 3 numeric failure, 4 checkpoint.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(hqcnn_core::Error::Parse(_)) => 1,
            Error::NonFinite { .. } => 3,
            Error::Checkpoint { .. } => 4,
            _ => 2,
        }
    }
}
