use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point element type shared by every kernel, transform and metric.
///
/// Implemented for `f32` and `f64`. Random draws and table parameters are
/// produced in `f64` and narrowed through [`Scalar::of`].
pub trait Scalar: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar always widens to f64")
    }

    /// Clamps into the unit interval. NaN maps to zero.
    #[inline]
    fn clamp_unit(self) -> Self {
        if self.is_nan() {
            Self::zero()
        } else {
            self.max(Self::zero()).min(Self::one())
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Mean computed relative to the first element.
///
/// A constant slice yields its value exactly, which keeps the
/// identity-on-constant kernels bit-exact.
pub fn shifted_mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut iter = values.into_iter();
    let first = iter.next()?;
    let mut acc = T::zero();
    let mut n = 1usize;
    for v in iter {
        acc += v - first;
        n += 1;
    }
    Some(first + acc / T::of(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_mean_of_constant_is_exact() {
        for v in [0.3_f64, 0.1, 0.7, 1.0 / 3.0] {
            assert_eq!(shifted_mean(std::iter::repeat_n(v, 1023)), Some(v));
        }
        assert_eq!(shifted_mean(Vec::<f32>::new()), None);
    }

    #[test]
    fn shifted_mean_matches_plain_mean() {
        let xs = [0.25_f64, 0.5, 1.0, 0.0];
        assert!((shifted_mean(xs).unwrap() - 0.4375).abs() < 1e-15);
    }
}
