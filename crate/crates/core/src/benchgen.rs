//! Materialises every (dataset, kind, severity) corruption set.
//!
//! Output layout: `out_root/{dataset}/{kind}/{severity}/{item_id}.png`, one
//! `manifest.json` per set, and a `layout.json` index at the root. Each item's
//! corruption seed is derived from its identity alone, so the tree does not
//! depend on worker count or scheduling.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruptions::{apply_corruption, CorruptionKind, CorruptionSpec, Severity, SEVERITY_TABLES};
use crate::datamodel::{
    load_image, save_image, save_manifest, CorruptionOrigin, DataError, DatasetManifest, ImageBuffer, ImageCache,
    ManifestItem, Split,
};

pub const LAYOUT_FILE: &str = "layout.json";
pub const SET_MANIFEST_FILE: &str = "manifest.json";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Seed for one item's corruption: FNV-1a over
/// `"{global_seed}|{dataset}|{kind}|{severity}|{item_id}"`, with the global
/// seed in decimal.
pub fn derive_item_seed(
    global_seed: u64,
    dataset: &str,
    kind: CorruptionKind,
    severity: Severity,
    item_id: &str,
) -> u64 {
    let key = format!("{global_seed}|{dataset}|{kind}|{severity}|{item_id}");
    fnv1a64(key.as_bytes())
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("dataset `{dataset}` is a {split:?} split; only test splits may be corrupted")]
    NotTestSplit { dataset: String, split: Split },
    #[error("dataset `{dataset}`: `{name}` is not usable as a file name")]
    UnsafeName { dataset: String, name: String },
    #[error("dataset `{0}` appears more than once")]
    DuplicateDataset(String),
    #[error("output {0} would overwrite a source image")]
    PathCollision(PathBuf),
    #[error("{} dataset(s) failed: {}", .0.len(), .0.iter().map(|f| f.dataset.as_str()).collect::<Vec<_>>().join(", "))]
    DatasetsFailed(Vec<DatasetFailure>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFailure {
    pub dataset: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<Severity>,
    /// Record a failing dataset and continue with the rest.
    pub keep_going: bool,
    pub cache: Option<ImageCache>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            kinds: CorruptionKind::STANDARD.to_vec(),
            severities: Severity::ALL.to_vec(),
            keep_going: false,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub dataset: String,
    pub kind: CorruptionKind,
    pub severity: Severity,
    /// Relative to the layout root.
    pub manifest: String,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkLayout {
    pub format_version: u32,
    pub severity_table_version: u32,
    pub global_seed: u64,
    pub entries: Vec<LayoutEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<DatasetFailure>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl BenchmarkLayout {
    pub fn get(&self, dataset: &str, kind: CorruptionKind, severity: Severity) -> Option<PathBuf> {
        self.entries
            .iter()
            .find(|e| e.dataset == dataset && e.kind == kind && e.severity == severity)
            .map(|e| self.root.join(&e.manifest))
    }

    pub fn manifest_paths(&self) -> impl Iterator<Item = PathBuf> + '_ {
        self.entries.iter().map(|e| self.root.join(&e.manifest))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let mut layout: BenchmarkLayout =
            serde_json::from_str(&text).map_err(|e| DataError::schema(path, e.to_string()))?;
        layout.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(layout)
    }

    fn save(&self) -> Result<(), DataError> {
        let path = self.root.join(LAYOUT_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| DataError::schema(&path, e.to_string()))?;
        text.push('\n');
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| DataError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| DataError::io(&path, e))
    }
}

fn check_name(dataset: &str, name: &str) -> Result<(), BenchError> {
    let bad = name.is_empty() || name == "." || name == ".." || name.contains(['/', '\\', '\0']) || name == LAYOUT_FILE;
    if bad {
        Err(BenchError::UnsafeName {
            dataset: dataset.into(),
            name: name.into(),
        })
    } else {
        Ok(())
    }
}

/// Corrupts every item of every manifest at every requested (kind, severity).
///
/// Runs on the current rayon pool; install a sized pool around the call to
/// control parallelism. Source images are only read. A set's manifest is
/// written only after all of its images are on disk, and `layout.json` last.
pub fn build_benchmark(
    manifests: &[DatasetManifest],
    global_seed: u64,
    out_root: &Path,
    options: &BenchmarkOptions,
) -> Result<BenchmarkLayout, BenchError> {
    let mut names = HashSet::new();
    for m in manifests {
        check_name(&m.dataset_name, &m.dataset_name)?;
        if !names.insert(m.dataset_name.as_str()) {
            return Err(BenchError::DuplicateDataset(m.dataset_name.clone()));
        }
        if let Some(split) = m.split {
            if split != Split::Test {
                return Err(BenchError::NotTestSplit {
                    dataset: m.dataset_name.clone(),
                    split,
                });
            }
        }
        for item in &m.items {
            check_name(&m.dataset_name, &item.id)?;
        }
    }
    fs::create_dir_all(out_root).map_err(|e| DataError::io(out_root, e))?;

    let mut sets = Vec::new();
    for &kind in &options.kinds {
        for &severity in &options.severities {
            sets.push((kind, severity));
        }
    }

    let mut layout = BenchmarkLayout {
        format_version: 1,
        severity_table_version: SEVERITY_TABLES.version,
        global_seed,
        entries: Vec::new(),
        failures: Vec::new(),
        root: out_root.to_path_buf(),
    };
    for manifest in manifests {
        match build_dataset(manifest, global_seed, out_root, &sets, options) {
            Ok(entries) => layout.entries.extend(entries),
            Err(e) if options.keep_going => layout.failures.push(DatasetFailure {
                dataset: manifest.dataset_name.clone(),
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    layout.save()?;
    if layout.failures.is_empty() {
        Ok(layout)
    } else {
        Err(BenchError::DatasetsFailed(layout.failures))
    }
}

fn set_dir(out_root: &Path, dataset: &str, kind: CorruptionKind, severity: Severity) -> PathBuf {
    out_root.join(dataset).join(kind.as_str()).join(severity.to_string())
}

fn build_dataset(
    manifest: &DatasetManifest,
    global_seed: u64,
    out_root: &Path,
    sets: &[(CorruptionKind, Severity)],
    options: &BenchmarkOptions,
) -> Result<Vec<LayoutEntry>, BenchError> {
    let dataset = manifest.dataset_name.as_str();
    let sources: HashSet<PathBuf> = manifest
        .items
        .iter()
        .filter_map(|item| fs::canonicalize(manifest.resolve(item)).ok())
        .collect();
    let mut dirs = Vec::with_capacity(sets.len());
    for &(kind, severity) in sets {
        let dir = set_dir(out_root, dataset, kind, severity);
        fs::create_dir_all(&dir).map_err(|e| DataError::io(&dir, e))?;
        let canonical = fs::canonicalize(&dir).map_err(|e| DataError::io(&dir, e))?;
        for item in &manifest.items {
            let target = canonical.join(format!("{}.png", item.id));
            if sources.contains(&target) {
                return Err(BenchError::PathCollision(target));
            }
        }
        dirs.push(dir);
    }

    let results: Vec<Result<(), DataError>> = manifest
        .items
        .par_iter()
        .map(|item| {
            let src = manifest.resolve(item);
            let img: ImageBuffer<f64> = match &options.cache {
                Some(cache) => cache.load(&src)?,
                None => load_image(&src)?,
            };
            for (&(kind, severity), dir) in sets.iter().zip(&dirs) {
                let seed = derive_item_seed(global_seed, dataset, kind, severity, &item.id);
                let out = apply_corruption(&img, &CorruptionSpec::new(kind, severity, seed));
                save_image(&out, dir.join(format!("{}.png", item.id)))?;
            }
            Ok(())
        })
        .collect();
    // first failure in manifest order, independent of scheduling
    results.into_iter().collect::<Result<Vec<()>, _>>()?;

    let mut entries = Vec::with_capacity(sets.len());
    for (&(kind, severity), dir) in sets.iter().zip(&dirs) {
        let derived = DatasetManifest {
            dataset_name: manifest.dataset_name.clone(),
            modality: manifest.modality,
            class_names: manifest.class_names.clone(),
            items: manifest
                .items
                .iter()
                .map(|item| ManifestItem {
                    id: item.id.clone(),
                    path: format!("{}.png", item.id),
                    label: item.label,
                })
                .collect(),
            split: Some(Split::Test),
            corruption: Some(CorruptionOrigin {
                kind,
                severity: severity.get(),
            }),
            root: dir.clone(),
        };
        save_manifest(&derived, dir.join(SET_MANIFEST_FILE))?;
        entries.push(LayoutEntry {
            dataset: dataset.to_string(),
            kind,
            severity,
            manifest: format!("{dataset}/{kind}/{severity}/{SET_MANIFEST_FILE}"),
            items: manifest.items.len(),
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Byte-at-a-time FNV-1a written independently of `fnv1a64`.
    fn fnv_oracle(s: &str) -> u64 {
        let mut h: u64 = 14695981039346656037;
        for b in s.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(1099511628211);
        }
        h
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn item_seed_matches_documented_hash() {
        let s = Severity::new(1).unwrap();
        let seed = derive_item_seed(0, "d", CorruptionKind::GaussianNoise, s, "x");
        assert_eq!(seed, 0x33af967a8fdf3e88);
        assert_eq!(seed, fnv_oracle("0|d|gaussian_noise|1|x"));
        assert_eq!(seed, derive_item_seed(0, "d", CorruptionKind::GaussianNoise, s, "x"));
    }

    #[test]
    fn item_seeds_do_not_collide() {
        let mut seen = HashSet::new();
        let datasets = ["pbc", "mammo", "pneumonia", "fundus", "oct"];
        for d in datasets {
            for kind in CorruptionKind::STANDARD {
                for s in Severity::ALL {
                    for i in 0..40 {
                        assert!(seen.insert(derive_item_seed(7, d, kind, s, &format!("item{i}"))));
                    }
                }
            }
        }
        assert_eq!(seen.len(), 175 * 40);
    }

    #[test]
    fn rejects_unsafe_names_and_train_splits() {
        let mut m = DatasetManifest {
            dataset_name: "ok".into(),
            modality: crate::Modality::Fundoscopy,
            class_names: vec!["a".into()],
            items: vec![ManifestItem {
                id: "../escape".into(),
                path: "x.png".into(),
                label: 0,
            }],
            split: None,
            corruption: None,
            root: PathBuf::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let opts = BenchmarkOptions::default();
        assert!(matches!(
            build_benchmark(std::slice::from_ref(&m), 0, dir.path(), &opts),
            Err(BenchError::UnsafeName { .. })
        ));
        m.items[0].id = "fine".into();
        m.split = Some(Split::Train);
        assert!(matches!(
            build_benchmark(std::slice::from_ref(&m), 0, dir.path(), &opts),
            Err(BenchError::NotTestSplit { .. })
        ));
        m.split = None;
        assert!(matches!(
            build_benchmark(&[m.clone(), m], 0, dir.path(), &opts),
            Err(BenchError::DuplicateDataset(_))
        ));
    }
}
