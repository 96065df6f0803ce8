//! Deterministic synthetic images.
//!
//! Everything here is a pure function of its arguments and seed, so tests and
//! demos can regenerate identical data anywhere.

use rand::Rng;
use rand_distr::StandardNormal;

use std::path::Path;

use crate::datamodel::{
    save_image, save_manifest, DataError, DatasetManifest, ImageBuffer, ManifestItem, Modality, Split,
};
use crate::rng::{kernel_rng, mix_seed};
use crate::scalar::Scalar;

/// Smooth "natural" image: a gradient plus a few Gaussian blobs and mild
/// texture, kept inside `[0.05, 0.95]` so photometric kernels start unclamped.
pub fn natural_image<T: Scalar>(height: usize, width: usize, channels: usize, seed: u64) -> ImageBuffer<T> {
    let mut rng = kernel_rng(mix_seed(seed, 0x4e41_5455));
    let base: f64 = rng.random_range(0.3..0.6);
    let gy: f64 = rng.random_range(-0.2..0.2);
    let gx: f64 = rng.random_range(-0.2..0.2);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.05..0.25),
                rng.random_range(-0.3..0.3),
            )
        })
        .collect();
    let tint: Vec<f64> = (0..channels).map(|_| rng.random_range(-0.05..0.05)).collect();
    let freq: f64 = rng.random_range(0.3..1.2);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    ImageBuffer::from_fn(height, width, channels, |y, x, c| {
        let (v, u) = (y as f64 / height as f64, x as f64 / width as f64);
        let mut val = base + gy * (v - 0.5) + gx * (u - 0.5) + tint[c];
        for &(by, bx, r, amp) in &blobs {
            let d2 = (v - by).powi(2) + (u - bx).powi(2);
            val += amp * (-d2 / (2.0 * r * r)).exp();
        }
        val += 0.04 * (freq * (x as f64 + 0.7 * y as f64) + phase).sin();
        T::of(val.clamp(0.05, 0.95))
    })
}

/// Square single-channel image with a centred disk of `radius` pixels.
pub fn disk<T: Scalar>(size: usize, background: f64, foreground: f64, radius: f64) -> ImageBuffer<T> {
    let c = (size as f64 - 1.0) / 2.0;
    ImageBuffer::from_fn(size, size, 1, |y, x, _| {
        let d = ((y as f64 - c).powi(2) + (x as f64 - c).powi(2)).sqrt();
        T::of(if d <= radius { foreground } else { background })
    })
}

/// Two-level checkerboard with `square`-pixel cells shifted by `(oy, ox)`.
pub fn checkerboard<T: Scalar>(
    height: usize,
    width: usize,
    square: usize,
    offset: (usize, usize),
    levels: (f64, f64),
) -> ImageBuffer<T> {
    ImageBuffer::from_fn(height, width, 1, |y, x, _| {
        let parity = ((y + offset.0) / square + (x + offset.1) / square) % 2;
        T::of(if parity == 0 { levels.0 } else { levels.1 })
    })
}

/// Checkerboard with seeded cell size (2–8 px), phase and levels.
pub fn random_checkerboard<T: Scalar>(size: usize, seed: u64) -> ImageBuffer<T> {
    let mut rng = kernel_rng(mix_seed(seed, 0x4348_4b42));
    let square = rng.random_range(2..=8);
    let offset = (rng.random_range(0..square), rng.random_range(0..square));
    let lo = rng.random_range(0.05..0.35);
    let hi = rng.random_range(0.65..0.95);
    checkerboard(size, size, square, offset, (lo, hi))
}

/// Class names of the toy shapes dataset, indexed by label.
pub const SHAPE_CLASSES: [&str; 4] = ["disk", "square", "cross", "triangle"];

/// One grayscale shapes image of class `label` (see [`SHAPE_CLASSES`]).
///
/// Position, size and intensities vary with the seed; a little Gaussian
/// texture keeps the images from being piecewise constant.
pub fn shape_image<T: Scalar>(size: usize, label: usize, seed: u64) -> ImageBuffer<T> {
    assert!(label < SHAPE_CLASSES.len(), "unknown shape label {label}");
    let mut rng = kernel_rng(mix_seed(seed, 0x5348_4150 + label as u64));
    let s = size as f64;
    let extent: f64 = rng.random_range(0.22..0.32) * s;
    let cy: f64 = rng.random_range(0.44..0.56) * s;
    let cx: f64 = rng.random_range(0.44..0.56) * s;
    let bg: f64 = rng.random_range(0.1..0.3);
    let fg: f64 = rng.random_range(0.65..0.9);
    let arm = extent * 0.35;
    let noise: Vec<f64> = (0..size * size)
        .map(|_| 0.03 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ImageBuffer::from_fn(size, size, 1, |y, x, _| {
        let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
        let inside = match label {
            0 => dy * dy + dx * dx <= extent * extent,
            1 => dy.abs() <= extent * 0.85 && dx.abs() <= extent * 0.85,
            2 => (dy.abs() <= arm && dx.abs() <= extent) || (dx.abs() <= arm && dy.abs() <= extent),
            _ => {
                // upward triangle with apex at (cy - extent, cx)
                let t = (dy + extent) / (2.0 * extent);
                (0.0..=1.0).contains(&t) && dx.abs() <= t * extent
            }
        };
        let v = if inside { fg } else { bg };
        T::of(v + noise[y * size + x])
    })
}

/// Balanced shapes dataset: `count` images cycling through the classes.
pub fn shapes_dataset<T: Scalar>(size: usize, count: usize, seed: u64) -> Vec<(ImageBuffer<T>, usize)> {
    (0..count)
        .map(|i| {
            let label = i % SHAPE_CLASSES.len();
            (shape_image(size, label, mix_seed(seed, i as u64)), label)
        })
        .collect()
}

/// Writes `count` natural images plus `manifest.json` under `dir`.
///
/// Labels cycle through `classes` class names; RGB when `channels` is 3.
#[allow(clippy::too_many_arguments)]
pub fn write_fixture_dataset(
    dir: &Path,
    name: &str,
    modality: Modality,
    classes: usize,
    count: usize,
    size: usize,
    channels: usize,
    seed: u64,
) -> Result<DatasetManifest, DataError> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| DataError::io(&images, e))?;
    let mut items = Vec::with_capacity(count);
    for i in 0..count {
        let id = format!("{name}-{i:04}");
        let img: ImageBuffer<f64> = natural_image(size, size, channels, mix_seed(seed, i as u64));
        save_image(&img, images.join(format!("{id}.png")))?;
        items.push(ManifestItem {
            path: format!("images/{id}.png"),
            id,
            label: (i % classes) as u32,
        });
    }
    let manifest = DatasetManifest {
        dataset_name: name.to_string(),
        modality,
        class_names: (0..classes).map(|c| format!("class_{c}")).collect(),
        items,
        split: Some(Split::Test),
        corruption: None,
        root: dir.to_path_buf(),
    };
    save_manifest(&manifest, dir.join("manifest.json"))?;
    Ok(manifest)
}
