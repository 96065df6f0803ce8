//! Severity-graded image corruption benchmarks and robustness metrics.
//!
//! The crate is organised around a handful of pieces that compose into the
//! full pipeline:
//!
//! * [`datamodel`] holds images, dataset manifests and prediction logs, plus
//!   their PNG / JSON / CSV encodings.
//! * [`corruptions`] implements the seven corruption kernels (and an opt-in
//!   block-quantization kernel) at five severities each.
//! * [`benchgen`] materialises every (dataset, kind, severity) set from clean
//!   manifests with per-item seeds.
//! * [`metrics`] turns prediction logs into accuracy grids, corruption errors,
//!   mCE and average accuracy.
//! * [`analysis`] provides DCT frequency profiles and pixel-density histograms.
//! * [`synth`] generates deterministic synthetic images for tests and demos.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common concrete choices.

pub mod analysis;
pub mod benchgen;
pub mod corruptions;
pub mod datamodel;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use analysis::{CoefficientGrid, DensityHistogram, FrequencyProfile};
pub use benchgen::{BenchmarkLayout, BenchmarkOptions};
pub use corruptions::{CorruptionKind, CorruptionSpec, Severity};
pub use datamodel::{
    CorruptionTag, DataError, DatasetManifest, ImageBuffer, ManifestItem, Modality, PredictionLog, PredictionRow,
};
pub use metrics::{AccuracyGrid, MetricsError, RobustnessReport};
pub use scalar::Scalar;

/// Double-precision image, the default for file I/O and the CLI.
pub type Image = ImageBuffer<f64>;
/// Single-precision image, used on the training hot path.
pub type ImageF32 = ImageBuffer<f32>;
/// Double-precision accuracy grid.
pub type Grid = AccuracyGrid<f64>;
/// Double-precision robustness report.
pub type Report = RobustnessReport<f64>;
/// Double-precision frequency profile.
pub type Profile = FrequencyProfile<f64>;
