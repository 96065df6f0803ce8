use std::path::PathBuf;

use thiserror::Error;

use corruptbench_core::datamodel::DataError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("image is {got:?} (h, w, c), encoder expects {expected:?}")]
    ImageShape {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class list is empty")]
    NoClasses,
    #[error("duplicate class name `{0}`")]
    DuplicateClass(String),
    #[error("label {label} is out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },
    #[error("few-shot percentage {0} outside (0, 100]")]
    InvalidPercent(f64),
    #[error("class {0} has no items")]
    EmptyClass(usize),
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] corruptbench_core::MetricsError),
}
