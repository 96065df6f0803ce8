use std::f64::consts::PI;

use rand::Rng;

use crate::corruptions::{reflect, Severity, SEVERITY_TABLES};
use crate::datamodel::ImageBuffer;
use crate::rng::kernel_rng;
use crate::scalar::Scalar;

/// Blur direction in `[0, π)` drawn from the item seed.
pub fn motion_blur_angle(seed: u64) -> f64 {
    let mut rng = kernel_rng(seed);
    rng.random::<f64>() * PI
}

/// Pixel offsets `(dy, dx)` of a rasterised line of `length` taps through the
/// origin at `angle` (radians, measured from the +x axis towards +y).
///
/// The line steps one pixel at a time along its dominant axis, so the taps
/// are always `length` distinct positions, symmetric about the origin.
pub fn motion_blur_offsets(length: usize, angle: f64) -> Vec<(isize, isize)> {
    assert!(length % 2 == 1, "motion blur length must be odd");
    let half = (length / 2) as isize;
    let (sin, cos) = angle.sin_cos();
    (-half..=half)
        .map(|i| {
            if cos.abs() >= sin.abs() {
                let dy = (i as f64 * sin / cos).round() as isize;
                (dy, i)
            } else {
                let dx = (i as f64 * cos / sin).round() as isize;
                (i, dx)
            }
        })
        .collect()
}

/// Normalised line-kernel convolution with reflect padding.
pub fn apply_motion_blur<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, seed: u64) -> ImageBuffer<T> {
    let length = SEVERITY_TABLES.motion_length[severity.index()];
    let offsets = motion_blur_offsets(length, motion_blur_angle(seed));
    convolve_uniform(img, &offsets)
}

/// Mean over the tap positions, written as `x + Σ w (x_k − x)` so that a
/// constant neighbourhood reproduces its value exactly.
fn convolve_uniform<T: Scalar>(img: &ImageBuffer<T>, offsets: &[(isize, isize)]) -> ImageBuffer<T> {
    let (h, w, ch) = img.shape();
    let weight = T::one() / T::of(offsets.len() as f64);
    let mut out = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let centre = img.get(y, x, c);
                let mut acc = T::zero();
                for &(dy, dx) in offsets {
                    let sy = reflect(y as isize + dy, h);
                    let sx = reflect(x as isize + dx, w);
                    acc += img.get(sy, sx, c) - centre;
                }
                out.push(centre + acc * weight);
            }
        }
    }
    ImageBuffer::from_unclamped(h, w, ch, out)
}

/// Zoom factors `1.00, 1.01, …, max_zoom` for `severity`.
pub fn zoom_factors(severity: Severity) -> Vec<f64> {
    let steps = ((SEVERITY_TABLES.zoom_max[severity.index()] - 1.0) * 100.0).round() as usize;
    (0..=steps).map(|k| 1.0 + k as f64 / 100.0).collect()
}

/// Average of the original and its centre-cropped bilinear re-zooms.
pub fn apply_zoom_blur<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, _seed: u64) -> ImageBuffer<T> {
    let factors = zoom_factors(severity);
    let (h, w, ch) = img.shape();
    let terms = T::of((factors.len() + 1) as f64);
    let mut acc = vec![T::zero(); h * w * ch];
    for &z in &factors {
        let zoomed = zoom_centre(img, z);
        for ((a, &zv), &v) in acc.iter_mut().zip(&zoomed).zip(img.pixels()) {
            *a += zv - v;
        }
    }
    let pixels = img.pixels().iter().zip(&acc).map(|(&v, &a)| v + a / terms).collect();
    ImageBuffer::from_unclamped(h, w, ch, pixels)
}

/// Magnifies about the image centre by `z >= 1`, keeping the original size.
fn zoom_centre<T: Scalar>(img: &ImageBuffer<T>, z: f64) -> Vec<T> {
    let (h, w, ch) = img.shape();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(h * w * ch);
    for y in 0..h {
        let sy = cy + (y as f64 - cy) / z;
        let y0 = sy.floor().max(0.0) as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = T::of(sy - y0 as f64);
        for x in 0..w {
            let sx = cx + (x as f64 - cx) / z;
            let x0 = sx.floor().max(0.0) as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = T::of(sx - x0 as f64);
            for c in 0..ch {
                let p00 = img.get(y0, x0, c);
                let p01 = img.get(y0, x1, c);
                let p10 = img.get(y1, x0, c);
                let p11 = img.get(y1, x1, c);
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                out.push(top + (bottom - top) * fy);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use std::collections::HashSet;

    fn s(level: u8) -> Severity {
        Severity::new(level).unwrap()
    }

    #[test]
    fn offsets_are_distinct_lines() {
        for &angle in &[0.0, 0.3, PI / 4.0, PI / 2.0, 2.0, 3.1] {
            for &len in &[7usize, 9, 13, 17, 21] {
                let offs = motion_blur_offsets(len, angle);
                let set: HashSet<_> = offs.iter().collect();
                assert_eq!(set.len(), len);
                assert!(set.contains(&(0, 0)));
                for &(dy, dx) in &offs {
                    assert!(set.contains(&(-dy, -dx)));
                }
            }
        }
        assert_eq!(motion_blur_offsets(3, 0.0), vec![(0, -1), (0, 0), (0, 1)]);
        assert_eq!(motion_blur_offsets(3, PI / 2.0), vec![(-1, 0), (0, 0), (1, 0)]);
    }

    #[test]
    fn motion_blur_impulse_response() {
        let mut img = ImageBuffer::<f64>::filled(64, 64, 1, 0.0).unwrap();
        img = ImageBuffer::from_fn(
            64,
            64,
            1,
            |y, x, _| if (y, x) == (32, 32) { 1.0 } else { img.get(y, x, 0) },
        );
        for level in 1..=5 {
            let len = SEVERITY_TABLES.motion_length[level - 1];
            for seed in 0..4 {
                let out = apply_motion_blur(&img, s(level as u8), seed);
                let nonzero = out.pixels().iter().filter(|&&v| v != 0.0).count();
                assert_eq!(nonzero, len);
                let sum: f64 = out.pixels().iter().sum();
                assert!((sum - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_on_constant() {
        for v in [0.0, 0.3, 0.77, 1.0] {
            let img = ImageBuffer::<f64>::filled(20, 13, 3, v).unwrap();
            for level in 1..=5 {
                assert_eq!(apply_motion_blur(&img, s(level), 17), img);
                assert_eq!(apply_zoom_blur(&img, s(level), 17), img);
            }
        }
    }

    #[test]
    fn zoom_term_counts() {
        let f = zoom_factors(s(1));
        assert_eq!(f.len(), 12);
        assert_eq!(f[0], 1.0);
        assert!((f[11] - 1.11).abs() < 1e-12);
        let counts: Vec<usize> = (1..=5).map(|l| zoom_factors(s(l)).len()).collect();
        assert_eq!(counts, vec![12, 17, 22, 27, 32]);
    }

    #[test]
    fn zoom_keeps_disk_centre_and_softens_edge() {
        let n = 65;
        let img = synth::disk::<f64>(n, 0.2, 0.9, 18.0);
        let centre = n / 2;
        let edge_gradient = |im: &ImageBuffer<f64>| {
            // strongest horizontal step along the centre row
            (1..n)
                .map(|x| (im.get(centre, x, 0) - im.get(centre, x - 1, 0)).abs())
                .fold(0.0, f64::max)
        };
        let mut prev = edge_gradient(&img);
        for level in 1..=5 {
            let out = apply_zoom_blur(&img, s(level), 0);
            assert_eq!(out.get(centre, centre, 0), img.get(centre, centre, 0));
            let g = edge_gradient(&out);
            assert!(g < prev, "severity {level}: {g} !< {prev}");
            prev = g;
        }
    }

    #[test]
    fn motion_blur_is_deterministic() {
        let img = synth::natural_image::<f32>(24, 24, 1, 4);
        assert_eq!(apply_motion_blur(&img, s(3), 5), apply_motion_blur(&img, s(3), 5));
    }
}
