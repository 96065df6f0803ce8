use crate::corruptions::{Severity, SEVERITY_TABLES};
use crate::datamodel::ImageBuffer;
use crate::scalar::{shifted_mean, Scalar};

/// Low-resolution grid `(rows, cols)` used at `severity`.
pub fn pixelate_grid(height: usize, width: usize, severity: Severity) -> (usize, usize) {
    let f = SEVERITY_TABLES.pixelate_scale[severity.index()];
    let dim = |n: usize| ((f * n as f64).round() as usize).clamp(1, n);
    (dim(height), dim(width))
}

/// Box downscale to the severity grid, then nearest-neighbour upscale back.
///
/// Source row `y` belongs to low-res row `floor(y·rows/H)`, which is both the
/// box the downscale averages and the cell the upscale reads from.
pub fn apply_pixelate<T: Scalar>(img: &ImageBuffer<T>, severity: Severity, _seed: u64) -> ImageBuffer<T> {
    let (h, w, ch) = img.shape();
    let (rows, cols) = pixelate_grid(h, w, severity);
    let row_of = |y: usize| y * rows / h;
    let col_of = |x: usize| x * cols / w;

    let mut members: Vec<Vec<T>> = vec![Vec::new(); rows * cols * ch];
    for y in 0..h {
        for x in 0..w {
            let cell = row_of(y) * cols + col_of(x);
            for c in 0..ch {
                members[cell * ch + c].push(img.get(y, x, c));
            }
        }
    }
    let means: Vec<T> = members
        .into_iter()
        .map(|m| shifted_mean(m).expect("every cell covers at least one pixel"))
        .collect();

    ImageBuffer::from_fn(h, w, ch, |y, x, c| means[(row_of(y) * cols + col_of(x)) * ch + c])
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
    fn grid_sizes() {
        assert_eq!(pixelate_grid(32, 32, s(1)), (19, 19));
        assert_eq!(pixelate_grid(32, 32, s(5)), (8, 8));
        assert_eq!(pixelate_grid(1, 3, s(5)), (1, 1));
    }

    #[test]
    fn distinct_values_bounded_by_blocks() {
        let img = synth::natural_image::<f64>(37, 29, 3, 5);
        for level in 1..=5 {
            let f = SEVERITY_TABLES.pixelate_scale[level as usize - 1];
            let bound = (f * 37.0).ceil() as usize * (f * 29.0).ceil() as usize;
            let out = apply_pixelate(&img, s(level), 0);
            for c in 0..3 {
                let distinct: HashSet<u64> = out.channel(c).pixels().iter().map(|v| v.to_bits()).collect();
                assert!(
                    distinct.len() <= bound,
                    "severity {level}: {} > {bound}",
                    distinct.len()
                );
            }
        }
    }

    #[test]
    fn constant_and_determinism() {
        let img = ImageBuffer::<f64>::filled(10, 10, 1, 0.37).unwrap();
        assert_eq!(apply_pixelate(&img, s(3), 0), img);
        let img = synth::natural_image::<f32>(16, 16, 1, 2);
        assert_eq!(apply_pixelate(&img, s(2), 0), apply_pixelate(&img, s(2), 9));
    }

    #[test]
    fn block_means_preserve_total() {
        let img = synth::natural_image::<f64>(20, 20, 1, 8);
        // 20 * 0.5 = 10 rows: every cell is exactly 2x2, so the mean is preserved
        let out = apply_pixelate(&img, s(2), 0);
        let total = |im: &ImageBuffer<f64>| im.pixels().iter().sum::<f64>();
        assert!((total(&out) - total(&img)).abs() < 1e-9);
    }
}
