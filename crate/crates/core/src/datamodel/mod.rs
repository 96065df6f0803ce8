//! Images, dataset manifests and prediction logs.

mod cache;
mod image;
mod manifest;
mod png;
mod predictions;

use std::path::PathBuf;

use thiserror::Error;

pub use self::cache::ImageCache;
pub use self::image::ImageBuffer;
pub use self::manifest::{
    load_manifest, save_manifest, CorruptionOrigin, DatasetManifest, ManifestItem, Modality, Split,
};
pub use self::png::{load_image, save_image, QUANTIZATION_LEVELS};
pub use self::predictions::{
    load_prediction_log, save_prediction_log, CorruptionTag, PredictionLog, PredictionRow, PREDICTION_LOG_HEADER,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema violation: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: item {row} ({item_id}): duplicate item id")]
    DuplicateItem { path: PathBuf, row: usize, item_id: String },
    #[error("{path}: item {row} ({item_id}): label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        path: PathBuf,
        row: usize,
        item_id: String,
        label: u32,
        num_classes: usize,
    },
    #[error("{path}: unsupported image: {message}")]
    UnsupportedImage { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("invalid image buffer: {0}")]
    InvalidBuffer(String),
    #[error("{path}: row {row}: {message}")]
    LogRow { path: PathBuf, row: usize, message: String },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        DataError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
