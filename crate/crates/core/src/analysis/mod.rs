//! Frequency and pixel-density diagnostics over image sets.

mod dct;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::datamodel::ImageBuffer;
use crate::scalar::Scalar;

/// Normalized radial frequency separating low from high energy.
pub const LOW_FREQUENCY_CUTOFF: f64 = 0.25;
pub const HISTOGRAM_BINS: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("expected a single-channel image, got {0} channels")]
    Multichannel(usize),
    #[error("image list is empty")]
    Empty,
    #[error("image {index} is {got:?}, expected {expected:?}")]
    SizeMismatch {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("coefficient buffer has {got} values, expected {expected}")]
    Length { expected: usize, got: usize },
}

/// Row-major `H×W` grid of DCT coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientGrid<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> CoefficientGrid<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Result<Self, AnalysisError> {
        if values.len() != height * width {
            return Err(AnalysisError::Length {
                expected: height * width,
                got: values.len(),
            });
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> T {
        self.values[u * self.width + v]
    }

    pub fn energy(&self) -> T {
        self.values.iter().map(|&c| c * c).sum()
    }

    /// Normalized radial frequency of coefficient `(u, v)`; 1 is Nyquist on both axes.
    pub fn radial_frequency(&self, u: usize, v: usize) -> f64 {
        let fu = u as f64 / self.height as f64;
        let fv = v as f64 / self.width as f64;
        (fu * fu + fv * fv).sqrt()
    }
}

/// Orthonormal 2-D DCT-II of a single-channel image.
pub fn dct2<T: Scalar>(img: &ImageBuffer<T>) -> Result<CoefficientGrid<T>, AnalysisError> {
    if img.channels() != 1 {
        return Err(AnalysisError::Multichannel(img.channels()));
    }
    let (h, w, _) = img.shape();
    CoefficientGrid::new(h, w, dct::separable(img.pixels(), h, w, false))
}

/// Inverse of [`dct2`], returned as raw row-major samples (no clamping).
pub fn idct2<T: Scalar>(grid: &CoefficientGrid<T>) -> Vec<T> {
    dct::separable(&grid.values, grid.height, grid.width, true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyProfile<T> {
    /// Mean absolute coefficient over the image set.
    pub magnitudes: CoefficientGrid<T>,
    pub low_fraction: T,
    pub high_fraction: T,
    pub images: usize,
}

impl<T: Scalar> FrequencyProfile<T> {
    /// `u,v,radius,magnitude` rows for plotting.
    pub fn to_csv(&self) -> String {
        let g = &self.magnitudes;
        let mut out = String::from("u,v,radius,magnitude\n");
        for u in 0..g.height {
            for v in 0..g.width {
                out.push_str(&format!("{u},{v},{:.6},{:.9}\n", g.radial_frequency(u, v), g.get(u, v)));
            }
        }
        out
    }
}

/// Luma DCT magnitudes averaged over `imgs`, with the pooled energy split at
/// [`LOW_FREQUENCY_CUTOFF`]. Images with no energy count as all-low.
pub fn frequency_profile<T: Scalar>(imgs: &[ImageBuffer<T>]) -> Result<FrequencyProfile<T>, AnalysisError> {
    let first = imgs.first().ok_or(AnalysisError::Empty)?;
    let (h, w) = (first.height(), first.width());
    for (index, img) in imgs.iter().enumerate() {
        if (img.height(), img.width()) != (h, w) {
            return Err(AnalysisError::SizeMismatch {
                index,
                expected: (h, w),
                got: (img.height(), img.width()),
            });
        }
    }
    let grids: Vec<CoefficientGrid<T>> = imgs
        .par_iter()
        .map(|img| dct2(&img.to_luma()))
        .collect::<Result<_, _>>()?;

    let mut sum_abs = vec![T::zero(); h * w];
    let mut sum_sq = vec![T::zero(); h * w];
    for g in &grids {
        for ((a, s), &c) in sum_abs.iter_mut().zip(sum_sq.iter_mut()).zip(&g.values) {
            *a += c.abs();
            *s += c * c;
        }
    }
    let n = T::of(imgs.len() as f64);
    let magnitudes = CoefficientGrid::new(h, w, sum_abs.into_iter().map(|a| a / n).collect())?;

    let (mut low, mut total) = (T::zero(), T::zero());
    for u in 0..h {
        for v in 0..w {
            let e = sum_sq[u * w + v];
            total += e;
            if magnitudes.radial_frequency(u, v) < LOW_FREQUENCY_CUTOFF {
                low += e;
            }
        }
    }
    let low_fraction = if total > T::zero() {
        (low / total).clamp_unit()
    } else {
        T::one()
    };
    Ok(FrequencyProfile {
        magnitudes,
        low_fraction,
        high_fraction: T::one() - low_fraction,
        images: imgs.len(),
    })
}

/// Pooled pixel-value histogram over `[0, 1]` in [`HISTOGRAM_BINS`] bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityHistogram<T> {
    pub mass: Vec<T>,
    pub samples: usize,
}

impl<T: Scalar> DensityHistogram<T> {
    pub fn bin_of(v: T) -> usize {
        ((v.as_f64() * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }

    pub fn bin_center(bin: usize) -> f64 {
        (bin as f64 + 0.5) / HISTOGRAM_BINS as f64
    }

    /// Mean value using bin centres.
    pub fn mean(&self) -> T {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * T::of(Self::bin_center(i)))
            .sum()
    }

    /// `bin,center,mass` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,center,mass\n");
        for (i, m) in self.mass.iter().enumerate() {
            out.push_str(&format!("{i},{:.6},{:.9}\n", Self::bin_center(i), m));
        }
        out
    }
}

pub fn pixel_histogram<T: Scalar>(imgs: &[ImageBuffer<T>]) -> Result<DensityHistogram<T>, AnalysisError> {
    if imgs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let counts: Vec<Vec<u64>> = imgs
        .par_iter()
        .map(|img| {
            let mut c = vec![0u64; HISTOGRAM_BINS];
            for &v in img.pixels() {
                c[DensityHistogram::bin_of(v)] += 1;
            }
            c
        })
        .collect();
    let mut total = vec![0u64; HISTOGRAM_BINS];
    for c in &counts {
        for (t, &x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    let samples: u64 = total.iter().sum();
    if samples == 0 {
        return Err(AnalysisError::Empty);
    }
    let n = T::of(samples as f64);
    Ok(DensityHistogram {
        mass: total.into_iter().map(|c| T::of(c as f64) / n).collect(),
        samples: samples as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruptions::{apply_corruption, CorruptionKind, CorruptionSpec, Severity};
    use crate::synth;

    #[test]
    fn two_by_two_impulse() {
        let img = ImageBuffer::<f64>::new(2, 2, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let g = dct2(&img).unwrap();
        for &c in g.values() {
            assert!((c - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_only_dc() {
        let img = ImageBuffer::filled(6, 10, 1, 0.3).unwrap();
        let g = dct2(&img).unwrap();
        assert!((g.get(0, 0) - 0.3 * 60f64.sqrt()).abs() < 1e-12);
        assert!(g.values()[1..].iter().all(|c| c.abs() < 1e-12));
        let p = frequency_profile(&[img]).unwrap();
        assert_eq!(p.low_fraction, 1.0);
    }

    #[test]
    fn parseval_and_inverse() {
        let img: ImageBuffer<f64> = synth::natural_image(24, 17, 1, 5);
        let g = dct2(&img).unwrap();
        let pixel_energy: f64 = img.pixels().iter().map(|v| v * v).sum();
        assert!((g.energy() - pixel_energy).abs() < 1e-6);
        let back = idct2(&g);
        for (a, b) in back.iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_multichannel_and_mismatch() {
        let rgb: ImageBuffer<f64> = synth::natural_image(4, 4, 3, 1);
        assert_eq!(dct2(&rgb).unwrap_err(), AnalysisError::Multichannel(3));
        let small = ImageBuffer::filled(4, 4, 1, 0.5).unwrap();
        let big = ImageBuffer::filled(4, 5, 1, 0.5).unwrap();
        assert!(matches!(
            frequency_profile(&[small, big]),
            Err(AnalysisError::SizeMismatch { index: 1, .. })
        ));
        assert_eq!(frequency_profile::<f64>(&[]).unwrap_err(), AnalysisError::Empty);
        assert_eq!(pixel_histogram::<f64>(&[]).unwrap_err(), AnalysisError::Empty);
    }

    #[test]
    fn profile_is_order_independent() {
        let imgs: Vec<ImageBuffer<f64>> = (0..5).map(|s| synth::natural_image(16, 16, 3, s)).collect();
        let a = frequency_profile(&imgs).unwrap();
        let mut rev = imgs.clone();
        rev.reverse();
        let b = frequency_profile(&rev).unwrap();
        assert!((a.low_fraction - b.low_fraction).abs() < 1e-12);
        assert!((a.low_fraction + a.high_fraction - 1.0).abs() < 1e-9);
        for (x, y) in a.magnitudes.values().iter().zip(b.magnitudes.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_and_blur_move_high_fraction() {
        let spec = |kind, seed| CorruptionSpec {
            kind,
            severity: Severity::new(5).unwrap(),
            seed,
        };
        for seed in 0..10 {
            let img: ImageBuffer<f64> = synth::natural_image(32, 32, 1, seed);
            let clean = frequency_profile(std::slice::from_ref(&img)).unwrap().high_fraction;
            let noisy = apply_corruption(&img, &spec(CorruptionKind::GaussianNoise, seed));
            assert!(frequency_profile(&[noisy]).unwrap().high_fraction > clean);

            let board: ImageBuffer<f64> = synth::random_checkerboard(32, seed);
            let clean = frequency_profile(std::slice::from_ref(&board)).unwrap().high_fraction;
            let blurred = apply_corruption(&board, &spec(CorruptionKind::MotionBlur, seed));
            assert!(frequency_profile(&[blurred]).unwrap().high_fraction < clean);
        }
    }

    #[test]
    fn histogram_basics() {
        let img = ImageBuffer::filled(8, 8, 3, 0.5).unwrap();
        let h = pixel_histogram(&[img]).unwrap();
        assert_eq!(h.mass[128], 1.0);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(DensityHistogram::<f64>::bin_of(1.0), 255);
        assert_eq!(DensityHistogram::<f64>::bin_of(0.0), 0);
    }

    #[test]
    fn brightness_shifts_histogram_mean() {
        let img: ImageBuffer<f64> = synth::natural_image(32, 32, 1, 3).map(|v| v * 0.5 + 0.2);
        let pixel_mean: f64 = img.pixels().iter().sum::<f64>() / img.pixels().len() as f64;
        let before = pixel_histogram(std::slice::from_ref(&img)).unwrap();
        let bright = apply_corruption(
            &img,
            &CorruptionSpec {
                kind: CorruptionKind::Brightness,
                severity: Severity::new(2).unwrap(),
                seed: 0,
            },
        );
        let after = pixel_histogram(&[bright]).unwrap();
        let bin = 1.0 / HISTOGRAM_BINS as f64;
        assert!((before.mean() - pixel_mean).abs() <= bin);
        assert!((after.mean() - before.mean() - 0.2).abs() <= bin);
    }
}
