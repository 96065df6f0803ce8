use crate::datamodel::DataError;
use crate::scalar::Scalar;

/// Row-major H×W×C image with intensities in `[0, 1]`.
///
/// Channel values for one pixel are stored contiguously, so the element at
/// `(y, x, c)` lives at `(y * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T> {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> ImageBuffer<T> {
    /// Builds a buffer, checking shape and range.
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<T>) -> Result<Self, DataError> {
        if channels != 1 && channels != 3 {
            return Err(DataError::InvalidBuffer(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(DataError::InvalidBuffer(format!("empty image {height}x{width}")));
        }
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(DataError::InvalidBuffer(format!(
                "expected {expected} intensities for {height}x{width}x{channels}, got {}",
                pixels.len()
            )));
        }
        if let Some((i, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(DataError::InvalidBuffer(format!(
                "intensity {v} at index {i} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    /// Builds a buffer from unclamped values, clamping every entry into `[0, 1]`.
    pub(crate) fn from_unclamped(height: usize, width: usize, channels: usize, mut pixels: Vec<T>) -> Self {
        debug_assert_eq!(pixels.len(), height * width * channels);
        for v in &mut pixels {
            *v = v.clamp_unit();
        }
        Self {
            height,
            width,
            channels,
            pixels,
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self, DataError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds a buffer by evaluating `f(y, x, c)`; results are clamped.
    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        let mut pixels = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(y, x, c));
                }
            }
        }
        Self::from_unclamped(height, width, channels, pixels)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.pixels[self.index(y, x, c)]
    }

    /// Applies `f` element-wise and clamps the result.
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        let pixels = self.pixels.iter().map(|&v| f(v)).collect();
        Self::from_unclamped(self.height, self.width, self.channels, pixels)
    }

    /// Copies one channel into a single-channel image.
    pub fn channel(&self, c: usize) -> Self {
        assert!(c < self.channels, "channel {c} out of range");
        let pixels = self.pixels.iter().skip(c).step_by(self.channels).copied().collect();
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            pixels,
        }
    }

    /// Equal-weight average over channels.
    pub fn to_luma(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let n = T::of(self.channels as f64);
        let pixels = self
            .pixels
            .chunks_exact(self.channels)
            .map(|px| px.iter().copied().sum::<T>() / n)
            .collect();
        Self::from_unclamped(self.height, self.width, 1, pixels)
    }

    /// Converts the element type.
    pub fn cast<U: Scalar>(&self) -> ImageBuffer<U> {
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: self.channels,
            pixels: self.pixels.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    /// Mean squared difference against another image of the same shape.
    pub fn mse(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "mse requires equal shapes");
        let n = T::of(self.pixels.len() as f64);
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            / n
    }

    /// Largest absolute per-element difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff requires equal shapes");
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}
