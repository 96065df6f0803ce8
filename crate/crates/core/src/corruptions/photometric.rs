use crate::corruptions::{Severity, SEVERITY_TABLES};
use crate::datamodel::ImageBuffer;
use crate::scalar::{shifted_mean, Scalar};

/// Additive shift in linear intensity, clamped. The seed is unused.
pub fn apply_brightness<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, _seed: u64) -> ImageBuffer<T> {
    let shift = T::of(SEVERITY_TABLES.brightness_shift[severity.index()]);
    img.map(|v| v + shift)
}

/// Scales deviations from the per-channel mean by the severity factor.
pub fn apply_contrast<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, _seed: u64) -> ImageBuffer<T> {
    let factor = T::of(SEVERITY_TABLES.contrast_factor[severity.index()]);
    let ch = img.channels();
    let means: Vec<T> = (0..ch)
        .map(|c| shifted_mean(img.pixels().iter().skip(c).step_by(ch).copied()).unwrap())
        .collect();
    let pixels = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mu = means[i % ch];
            (v - mu) * factor + mu
        })
        .collect();
    ImageBuffer::from_unclamped(img.height(), img.width(), ch, pixels)
}
