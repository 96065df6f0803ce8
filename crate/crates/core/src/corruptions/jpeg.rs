use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::corruptions::{Severity, SEVERITY_TABLES};
use crate::datamodel::ImageBuffer;
use crate::scalar::Scalar;

/// Standard JPEG luminance quantization table (ITU T.81 Annex K), row-major.
pub const JPEG_LUMA_TABLE: [f64; 64] = [
    16.0, 11.0, 10.0, 16.0, 24.0, 40.0, 51.0, 61.0, //
    12.0, 12.0, 14.0, 19.0, 26.0, 58.0, 60.0, 55.0, //
    14.0, 13.0, 16.0, 24.0, 40.0, 57.0, 69.0, 56.0, //
    14.0, 17.0, 22.0, 29.0, 51.0, 87.0, 80.0, 62.0, //
    18.0, 22.0, 37.0, 56.0, 68.0, 109.0, 103.0, 77.0, //
    24.0, 35.0, 55.0, 64.0, 81.0, 104.0, 113.0, 92.0, //
    49.0, 64.0, 78.0, 87.0, 103.0, 121.0, 120.0, 101.0, //
    72.0, 92.0, 95.0, 98.0, 112.0, 100.0, 103.0, 99.0,
];

/// Quantizer steps for an integer quality in `1..=100` (libjpeg scaling).
///
/// Steps are in units of 8-bit intensity DCT coefficients.
pub fn quantization_steps(quality: u32) -> [f64; 64] {
    let q = quality.clamp(1, 100) as f64;
    let scale = if q < 50.0 { 5000.0 / q } else { 200.0 - 2.0 * q };
    JPEG_LUMA_TABLE.map(|t| ((t * scale + 50.0) / 100.0).floor().clamp(1.0, 255.0))
}

/// 8×8 block DCT quantization at the severity's quality. The seed is unused.
pub fn apply_block_jpeg<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, _seed: u64) -> ImageBuffer<T> {
    let steps = quantization_steps(SEVERITY_TABLES.jpeg_quality[severity.index()]);
    block_quantize(img, &steps)
}

fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (k, row) in m.iter_mut().enumerate() {
            let a = if k == 0 {
                (1.0f64 / 8.0).sqrt()
            } else {
                (2.0f64 / 8.0).sqrt()
            };
            for (n, v) in row.iter_mut().enumerate() {
                *v = a * (PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos();
            }
        }
        m
    })
}

/// Transforms each channel in 8×8 blocks with an orthonormal DCT, truncates
/// every coefficient toward zero onto its step grid, and inverts.
///
/// Coefficients are taken on `255·x` without a level shift; truncation never
/// grows a coefficient, so block energy cannot increase. Partial edge blocks
/// are padded by edge replication and only the in-image part is written back.
pub fn block_quantize<T: Scalar>(img: &ImageBuffer<T>, steps: &[f64; 64]) -> ImageBuffer<T> {
    let (h, w, ch) = img.shape();
    let b = basis();
    let mut out = vec![T::zero(); h * w * ch];
    let mut block = [[0.0f64; 8]; 8];
    let mut tmp = [[0.0f64; 8]; 8];
    for c in 0..ch {
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                for (i, row) in block.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = 255.0 * img.get((by + i).min(h - 1), (bx + j).min(w - 1), c).as_f64();
                    }
                }
                // forward: B · X · Bᵀ
                for u in 0..8 {
                    for j in 0..8 {
                        tmp[u][j] = (0..8).map(|i| b[u][i] * block[i][j]).sum();
                    }
                }
                for u in 0..8 {
                    for v in 0..8 {
                        let coeff: f64 = (0..8).map(|j| tmp[u][j] * b[v][j]).sum();
                        let step = steps[u * 8 + v];
                        block[u][v] = (coeff / step).trunc() * step;
                    }
                }
                // inverse: Bᵀ · C · B
                for i in 0..8 {
                    for v in 0..8 {
                        tmp[i][v] = (0..8).map(|u| b[u][i] * block[u][v]).sum();
                    }
                }
                for i in 0..8 {
                    for j in 0..8 {
                        let (y, x) = (by + i, bx + j);
                        if y < h && x < w {
                            let v: f64 = (0..8).map(|v| tmp[i][v] * b[v][j]).sum();
                            out[img.index(y, x, c)] = T::of(v / 255.0);
                        }
                    }
                }
            }
        }
    }
    ImageBuffer::from_unclamped(h, w, ch, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn energy(img: &ImageBuffer<f64>) -> f64 {
        img.pixels().iter().map(|v| v * v).sum()
    }

    #[test]
    fn libjpeg_steps() {
        assert_eq!(quantization_steps(50), JPEG_LUMA_TABLE);
        assert!(quantization_steps(100).iter().all(|&s| s == 1.0));
        // quality 25 doubles the table: 16 -> 32
        assert_eq!(quantization_steps(25)[0], 32.0);
    }

    #[test]
    fn constant_image_within_half_dc_step() {
        for level in 1..=5u8 {
            let q = SEVERITY_TABLES.jpeg_quality[level as usize - 1];
            let dc_step = quantization_steps(q)[0] / 255.0;
            for v in [0.13, 0.5, 0.71, 0.99] {
                let img = ImageBuffer::<f64>::filled(16, 24, 1, v).unwrap();
                let out = apply_block_jpeg(&img, Severity::new(level).unwrap(), 0);
                assert!(out.max_abs_diff(&img) <= 0.5 * dc_step, "q{q} v{v}");
            }
        }
    }

    #[test]
    fn energy_never_increases() {
        for seed in 0..10 {
            let img = synth::natural_image::<f64>(32, 32, 1, seed);
            for level in 1..=5u8 {
                let out = apply_block_jpeg(&img, Severity::new(level).unwrap(), 0);
                assert!(energy(&out) <= energy(&img) + 1e-9);
            }
        }
    }

    #[test]
    fn fine_steps_reproduce_input() {
        let img = synth::natural_image::<f64>(24, 20, 3, 3);
        let out = block_quantize(&img, &[1e-3; 64]);
        assert!(out.max_abs_diff(&img) < 1e-3);
        // unit steps bound the per-coefficient error by 1/255
        let out = block_quantize(&img, &[1.0; 64]);
        assert!(out.max_abs_diff(&img) < 64.0 * 0.25 / 255.0);
    }

    #[test]
    fn distortion_grows_with_severity() {
        let imgs: Vec<_> = (0..20).map(|s| synth::natural_image::<f64>(32, 32, 1, s)).collect();
        let mse = |level: u8| {
            imgs.iter()
                .map(|im| apply_block_jpeg(im, Severity::new(level).unwrap(), 0).mse(im))
                .sum::<f64>()
        };
        let curve: Vec<f64> = (1..=5).map(mse).collect();
        assert!(curve.windows(2).all(|w| w[0] < w[1]), "{curve:?}");
    }
}
