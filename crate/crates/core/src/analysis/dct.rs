use crate::scalar::Scalar;

/// Row-major `n×n` orthonormal DCT-II basis: `m[k][i] = a_k cos(π(2i+1)k / 2n)`.
pub(crate) fn basis<T: Scalar>(n: usize) -> Vec<T> {
    let nf = n as f64;
    let mut m = Vec::with_capacity(n * n);
    for k in 0..n {
        let a = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            let angle = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf);
            m.push(T::of(a * angle.cos()));
        }
    }
    m
}

/// `C_h · X · C_wᵀ` when `inverse` is false, `C_hᵀ · X · C_w` otherwise.
pub(crate) fn separable<T: Scalar>(x: &[T], h: usize, w: usize, inverse: bool) -> Vec<T> {
    let ch = basis::<T>(h);
    let cw = basis::<T>(w);
    let at = |m: &[T], n: usize, r: usize, c: usize| if inverse { m[c * n + r] } else { m[r * n + c] };

    let mut rows = vec![T::zero(); h * w];
    for y in 0..h {
        let src = &x[y * w..(y + 1) * w];
        for v in 0..w {
            let mut acc = T::zero();
            for (i, &s) in src.iter().enumerate() {
                acc += at(&cw, w, v, i) * s;
            }
            rows[y * w + v] = acc;
        }
    }
    let mut out = vec![T::zero(); h * w];
    for u in 0..h {
        for y in 0..h {
            let c = at(&ch, h, u, y);
            let src = &rows[y * w..(y + 1) * w];
            let dst = &mut out[u * w..(u + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[f64], h: usize, w: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        let a = |k: usize, n: usize| {
            if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            }
        };
        let mut out = vec![0.0; h * w];
        for u in 0..h {
            for v in 0..w {
                let mut s = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        s += x[y * w + xx]
                            * (PI * (2 * y + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                            * (PI * (2 * xx + 1) as f64 * v as f64 / (2 * w) as f64).cos();
                    }
                }
                out[u * w + v] = a(u, h) * a(v, w) * s;
            }
        }
        out
    }

    #[test]
    fn matches_direct_sum() {
        let (h, w) = (5, 7);
        let x: Vec<f64> = (0..h * w).map(|i| ((i * 37 % 11) as f64) / 11.0).collect();
        let fast = separable(&x, h, w, false);
        for (a, b) in fast.iter().zip(naive(&x, h, w)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let n = 6;
        let m = basis::<f64>(n);
        for r in 0..n {
            for s in 0..n {
                let dot: f64 = (0..n).map(|i| m[r * n + i] * m[s * n + i]).sum();
                assert!((dot - if r == s { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
