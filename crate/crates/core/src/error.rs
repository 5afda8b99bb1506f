use mtscene_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("{context}: extents {expected:?} expected, got {actual:?}")]
    Extent {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("{context}: class id {id} is not part of spectrum '{spectrum}'")]
    UnknownClass {
        context: &'static str,
        id: u32,
        spectrum: String,
    },
    #[error("orientation: {0}")]
    Orientation(String),
    #[error("merge: {0}")]
    Merge(String),
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("loss: {0}")]
    Loss(String),
    #[error("dataset {path}: {reason}")]
    Dataset { path: String, reason: String },
    #[error("synthetic scene: {0}")]
    Synth(String),
    #[error("graph: {0}")]
    Graph(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image error on {path}: {reason}")]
    Image { path: String, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
