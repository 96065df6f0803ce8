//! Severity-graded corruption kernels.
//!
//! Seven kinds make up the standard set; `block_jpeg` is an opt-in extra.
//! Every kernel is a pure function of `(image, severity, seed)`, preserves the
//! image shape and returns intensities clamped to `[0, 1]`.

mod blur;
mod jpeg;
mod noise;
mod photometric;
mod pixelate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::ImageBuffer;
use crate::scalar::Scalar;

pub use blur::{apply_motion_blur, apply_zoom_blur, motion_blur_angle, motion_blur_offsets, zoom_factors};
pub use jpeg::{apply_block_jpeg, block_quantize, quantization_steps, JPEG_LUMA_TABLE};
pub use noise::{apply_gaussian_noise, apply_impulse_noise, impulse_count};
pub use photometric::{apply_brightness, apply_contrast};
pub use pixelate::{apply_pixelate, pixelate_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ImpulseNoise,
    MotionBlur,
    ZoomBlur,
    Brightness,
    Contrast,
    Pixelate,
    BlockJpeg,
}

impl CorruptionKind {
    /// The seven standard kinds, in result-table column order.
    pub const STANDARD: [CorruptionKind; 7] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::Pixelate,
    ];

    pub const ALL: [CorruptionKind; 8] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::Pixelate,
        CorruptionKind::BlockJpeg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::BlockJpeg => "block_jpeg",
        }
    }

    pub fn is_optional(self) -> bool {
        self == CorruptionKind::BlockJpeg
    }

    /// Whether the kernel consumes its seed.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            CorruptionKind::GaussianNoise | CorruptionKind::ImpulseNoise | CorruptionKind::MotionBlur
        )
    }

    /// Name of the severity-indexed parameter and its five values.
    pub fn parameters(self) -> (&'static str, [f64; 5]) {
        let t = &SEVERITY_TABLES;
        match self {
            CorruptionKind::GaussianNoise => ("sigma", t.gaussian_sigma),
            CorruptionKind::ImpulseNoise => ("fraction", t.impulse_fraction),
            CorruptionKind::MotionBlur => ("kernel_length", t.motion_length.map(|v| v as f64)),
            CorruptionKind::ZoomBlur => ("max_zoom", t.zoom_max),
            CorruptionKind::Brightness => ("shift", t.brightness_shift),
            CorruptionKind::Contrast => ("factor", t.contrast_factor),
            CorruptionKind::Pixelate => ("scale", t.pixelate_scale),
            CorruptionKind::BlockJpeg => ("quality", t.jpeg_quality.map(|v| v as f64)),
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown corruption kind `{s}`"))
    }
}

/// Severity level in `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const ALL: [Severity; 5] = [Severity(1), Severity(2), Severity(3), Severity(4), Severity(5)];

    pub fn new(level: u8) -> Result<Self, String> {
        if (1..=5).contains(&level) {
            Ok(Severity(level))
        } else {
            Err(format!("severity {level} outside 1..=5"))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based index into a severity table.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for Severity {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Severity::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: Severity, seed: u64) -> Self {
        Self { kind, severity, seed }
    }
}

/// Severity parameters for every kernel, indexed by `severity - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityTables {
    pub version: u32,
    pub gaussian_sigma: [f64; 5],
    pub impulse_fraction: [f64; 5],
    pub motion_length: [usize; 5],
    pub zoom_max: [f64; 5],
    pub brightness_shift: [f64; 5],
    pub contrast_factor: [f64; 5],
    pub pixelate_scale: [f64; 5],
    pub jpeg_quality: [u32; 5],
}

/// ImageNet-C-compatible parameters. Bump `version` on any change: outputs of
/// `build_benchmark` are a function of these values.
pub const SEVERITY_TABLES: SeverityTables = SeverityTables {
    version: 1,
    gaussian_sigma: [0.08, 0.12, 0.18, 0.26, 0.38],
    impulse_fraction: [0.03, 0.06, 0.09, 0.17, 0.27],
    motion_length: [7, 9, 13, 17, 21],
    zoom_max: [1.11, 1.16, 1.21, 1.26, 1.31],
    brightness_shift: [0.1, 0.2, 0.3, 0.4, 0.5],
    contrast_factor: [0.4, 0.3, 0.2, 0.1, 0.05],
    pixelate_scale: [0.6, 0.5, 0.4, 0.3, 0.25],
    jpeg_quality: [25, 18, 15, 10, 7],
};

/// Severity tables as CSV (`kind,parameter,s1..s5`), one row per kind.
pub fn severity_table_csv(include_optional: bool) -> String {
    let mut out = String::from("kind,parameter,s1,s2,s3,s4,s5\n");
    for kind in CorruptionKind::ALL {
        if kind.is_optional() && !include_optional {
            continue;
        }
        let (name, values) = kind.parameters();
        out.push_str(kind.as_str());
        out.push(',');
        out.push_str(name);
        for v in values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Runs the kernel selected by `spec`.
pub fn apply_corruption<T: Scalar>(img: &ImageBuffer<T>, spec: &CorruptionSpec) -> ImageBuffer<T> {
    let (s, seed) = (spec.severity, spec.seed);
    match spec.kind {
        CorruptionKind::GaussianNoise => apply_gaussian_noise(img, s, seed),
        CorruptionKind::ImpulseNoise => apply_impulse_noise(img, s, seed),
        CorruptionKind::MotionBlur => apply_motion_blur(img, s, seed),
        CorruptionKind::ZoomBlur => apply_zoom_blur(img, s, seed),
        CorruptionKind::Brightness => apply_brightness(img, s, seed),
        CorruptionKind::Contrast => apply_contrast(img, s, seed),
        CorruptionKind::Pixelate => apply_pixelate(img, s, seed),
        CorruptionKind::BlockJpeg => apply_block_jpeg(img, s, seed),
    }
}

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`. Handles offsets larger than `n`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn kind_names_roundtrip() {
        for k in CorruptionKind::ALL {
            assert_eq!(k.as_str().parse::<CorruptionKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
        assert!("fog".parse::<CorruptionKind>().is_err());
        assert_eq!(CorruptionKind::STANDARD.len(), 7);
        assert!(!CorruptionKind::STANDARD.contains(&CorruptionKind::BlockJpeg));
    }

    #[test]
    fn severity_bounds() {
        assert!(Severity::new(0).is_err());
        assert!(Severity::new(6).is_err());
        assert_eq!(Severity::new(5).unwrap().index(), 4);
        assert!(serde_json::from_str::<Severity>("9").is_err());
    }

    #[test]
    fn reflect_indexing() {
        let got: Vec<usize> = (-4..9).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1, 2]);
        assert_eq!(reflect(-7, 1), 0);
    }

    #[test]
    fn table_csv_has_seven_rows() {
        let csv = severity_table_csv(false);
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.contains("gaussian_noise,sigma,0.08,0.12,0.18,0.26,0.38\n"));
        assert!(csv.contains("motion_blur,kernel_length,7,9,13,17,21\n"));
        assert!(!csv.contains("block_jpeg"));
        assert!(severity_table_csv(true).contains("block_jpeg,quality,25,18,15,10,7"));
    }

    #[test]
    fn dispatch_identity() {
        let img = synth::natural_image::<f64>(24, 24, 1, 3);
        let s2 = Severity::new(2).unwrap();
        let spec = CorruptionSpec::new(CorruptionKind::GaussianNoise, s2, 99);
        assert_eq!(apply_corruption(&img, &spec), apply_gaussian_noise(&img, s2, 99));
        let spec = CorruptionSpec::new(CorruptionKind::Pixelate, s2, 99);
        assert_eq!(apply_corruption(&img, &spec), apply_pixelate(&img, s2, 99));
    }

    #[test]
    fn every_spec_preserves_shape_and_range() {
        for channels in [1, 3] {
            let img = synth::natural_image::<f64>(32, 32, channels, 11);
            for kind in CorruptionKind::ALL {
                for s in Severity::ALL {
                    let out = apply_corruption(&img, &CorruptionSpec::new(kind, s, 5));
                    assert_eq!(out.shape(), img.shape(), "{kind} s{s}");
                    assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }

    #[test]
    fn all_standard_specs_give_distinct_outputs() {
        let img = synth::natural_image::<f64>(32, 32, 1, 21);
        let mut outs = Vec::new();
        for kind in CorruptionKind::STANDARD {
            for s in Severity::ALL {
                outs.push(apply_corruption(&img, &CorruptionSpec::new(kind, s, 1234)));
            }
        }
        assert_eq!(outs.len(), 35);
        for i in 0..outs.len() {
            assert_ne!(outs[i], img, "spec {i} is identity");
            for j in i + 1..outs.len() {
                assert_ne!(outs[i], outs[j], "specs {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn seed_only_moves_stochastic_kernels() {
        let img = synth::natural_image::<f64>(32, 32, 3, 8);
        for kind in CorruptionKind::ALL {
            let a = apply_corruption(&img, &CorruptionSpec::new(kind, Severity::new(3).unwrap(), 1));
            let b = apply_corruption(&img, &CorruptionSpec::new(kind, Severity::new(3).unwrap(), 2));
            assert_eq!(a != b, kind.is_stochastic(), "{kind}");
        }
    }
}
