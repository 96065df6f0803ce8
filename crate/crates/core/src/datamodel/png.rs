use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};

use crate::datamodel::{DataError, ImageBuffer};
use crate::scalar::Scalar;

/// Largest 8-bit code; intensities map as `v / 255` on load.
pub const QUANTIZATION_LEVELS: u32 = 255;

/// Loads an 8-bit grayscale or RGB PNG into unit-interval intensities.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<ImageBuffer<T>, DataError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| DataError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| DataError::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(DataError::UnsupportedImage {
            path: path.into(),
            message: "only PNG is supported".into(),
        });
    }
    let decoded = reader.decode().map_err(|e| DataError::Image {
        path: path.into(),
        message: e.to_string(),
    })?;
    let (channels, width, height, bytes) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.width(), buf.height(), buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.width(), buf.height(), buf.into_raw()),
        other => {
            return Err(DataError::UnsupportedImage {
                path: path.into(),
                message: format!("{:?}; expected 8-bit L or RGB", other.color()),
            })
        }
    };
    from_bytes(height as usize, width as usize, channels, &bytes)
}

pub(crate) fn from_bytes<T: Scalar>(
    height: usize,
    width: usize,
    channels: usize,
    bytes: &[u8],
) -> Result<ImageBuffer<T>, DataError> {
    let scale = T::of(QUANTIZATION_LEVELS as f64);
    let pixels = bytes.iter().map(|&b| T::of(b as f64) / scale).collect();
    ImageBuffer::new(height, width, channels, pixels)
}

/// Round-half-up 8-bit quantization, clamped to `[0, 255]`.
#[inline]
pub(crate) fn quantize<T: Scalar>(v: T) -> u8 {
    let q = (v.as_f64() * QUANTIZATION_LEVELS as f64 + 0.5).floor();
    q.clamp(0.0, QUANTIZATION_LEVELS as f64) as u8
}

/// Writes an 8-bit PNG (L8 or RGB8 depending on the channel count).
pub fn save_image<T: Scalar>(img: &ImageBuffer<T>, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.pixels().iter().map(|&v| quantize(v)).collect();
    let color = if img.channels() == 1 {
        ColorType::L8
    } else {
        ColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => DataError::io(path, io),
        other => DataError::Image {
            path: path.into(),
            message: other.to_string(),
        },
    })
}
