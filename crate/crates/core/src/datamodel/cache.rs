use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::datamodel::png::{from_bytes, quantize};
use crate::datamodel::{load_image, DataError, ImageBuffer};
use crate::scalar::Scalar;

const MAGIC: &[u8; 6] = b"CBIMG1";

/// On-disk cache of decoded PNGs, keyed by source path, size and mtime.
///
/// Entries are the raw 8-bit samples behind a small header
/// (`CBIMG1`, then height, width, channels as little-endian `u32`), so a hit
/// reproduces `load_image` exactly. A corrupt or stale entry is ignored.
#[derive(Debug, Clone)]
pub struct ImageCache {
    dir: PathBuf,
}

impl ImageCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, DataError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| DataError::io(&dir, e))?;
        Ok(Self { dir })
    }

    /// Reads the cache directory from `CORRUPTBENCH_CACHE`, if set.
    pub fn from_env() -> Result<Option<Self>, DataError> {
        match std::env::var_os("CORRUPTBENCH_CACHE") {
            Some(dir) if !dir.is_empty() => Self::new(PathBuf::from(dir)).map(Some),
            _ => Ok(None),
        }
    }

    fn key(&self, path: &Path) -> Result<PathBuf, DataError> {
        let meta = fs::metadata(path).map_err(|e| DataError::io(path, e))?;
        let mtime = meta
            .modified()
            .ok()
            .and_then(|t| t.duration_since(std::time::UNIX_EPOCH).ok())
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let canonical = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        let text = format!("{}|{}|{}", canonical.display(), meta.len(), mtime);
        Ok(self
            .dir
            .join(format!("{:016x}.bin", crate::benchgen::fnv1a64(text.as_bytes()))))
    }

    pub fn load<T: Scalar>(&self, path: impl AsRef<Path>) -> Result<ImageBuffer<T>, DataError> {
        let path = path.as_ref();
        let entry = self.key(path)?;
        if let Some(img) = read_entry(&entry) {
            return Ok(img);
        }
        let img: ImageBuffer<T> = load_image(path)?;
        // a failed cache write only costs a re-decode next time
        let _ = write_entry(&entry, &img);
        Ok(img)
    }
}

fn read_entry<T: Scalar>(entry: &Path) -> Option<ImageBuffer<T>> {
    let bytes = fs::read(entry).ok()?;
    if bytes.len() < 18 || &bytes[..6] != MAGIC {
        return None;
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let body = &bytes[18..];
    if body.len() != h * w * c {
        return None;
    }
    from_bytes(h, w, c, body).ok()
}

fn write_entry<T: Scalar>(entry: &Path, img: &ImageBuffer<T>) -> std::io::Result<()> {
    let tmp = entry.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(MAGIC)?;
    for d in [img.height(), img.width(), img.channels()] {
        f.write_all(&(d as u32).to_le_bytes())?;
    }
    let body: Vec<u8> = img.pixels().iter().map(|&v| quantize(v)).collect();
    f.write_all(&body)?;
    drop(f);
    fs::rename(tmp, entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::save_image;

    #[test]
    fn hit_equals_fresh_decode() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.png");
        let img = ImageBuffer::<f64>::from_fn(5, 7, 3, |y, x, c| ((y * 31 + x * 7 + c * 3) % 256) as f64 / 255.0);
        save_image(&img, &p).unwrap();
        let cache = ImageCache::new(dir.path().join("cache")).unwrap();
        let first: ImageBuffer<f64> = cache.load(&p).unwrap();
        assert_eq!(fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);
        let second: ImageBuffer<f64> = cache.load(&p).unwrap();
        assert_eq!(first, second);
        assert_eq!(first, load_image::<f64>(&p).unwrap());
    }
}
