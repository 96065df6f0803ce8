use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::corruptions::{Severity, SEVERITY_TABLES};
use crate::datamodel::ImageBuffer;
use crate::rng::kernel_rng;
use crate::scalar::Scalar;

/// Additive i.i.d. zero-mean Gaussian noise, clamped.
///
/// Draws are consumed in storage order, one per element.
pub fn apply_gaussian_noise<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, seed: u64) -> ImageBuffer<T> {
    let sigma = SEVERITY_TABLES.gaussian_sigma[severity.index()];
    let mut rng = kernel_rng(seed);
    img.map(|v| {
        let n: f64 = rng.sample(StandardNormal);
        v + T::of(sigma * n)
    })
}

/// Number of pixel positions replaced at `severity` for `positions` pixels.
pub fn impulse_count(positions: usize, severity: Severity) -> usize {
    let fraction = SEVERITY_TABLES.impulse_fraction[severity.index()];
    ((fraction * positions as f64).round() as usize).min(positions)
}

/// Salt-and-pepper noise on spatial positions.
///
/// `impulse_count(H·W)` positions are drawn without replacement; each is set to
/// 0 or 1 with equal probability across all of its channels.
pub fn apply_impulse_noise<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, seed: u64) -> ImageBuffer<T> {
    let positions = img.height() * img.width();
    let count = impulse_count(positions, severity);
    let mut rng = kernel_rng(seed);
    let chosen = index::sample(&mut rng, positions, count);
    let channels = img.channels();
    let mut pixels = img.pixels().to_vec();
    for pos in chosen.iter() {
        let value = if rng.random_bool(0.5) { T::one() } else { T::zero() };
        for v in &mut pixels[pos * channels..(pos + 1) * channels] {
            *v = value;
        }
    }
    ImageBuffer::from_unclamped(img.height(), img.width(), channels, pixels)
}
