use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corruptions::CorruptionKind;
use crate::datamodel::DataError;

/// Imaging modality of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    CellMicroscopy,
    BreastImaging,
    ChestXray,
    Fundoscopy,
    RetinalOct,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::CellMicroscopy,
        Modality::BreastImaging,
        Modality::ChestXray,
        Modality::Fundoscopy,
        Modality::RetinalOct,
    ];

    /// Human-readable name used inside prompt templates.
    pub fn display_name(self) -> &'static str {
        match self {
            Modality::CellMicroscopy => "cell microscopy",
            Modality::BreastImaging => "breast imaging",
            Modality::ChestXray => "chest x-ray",
            Modality::Fundoscopy => "fundoscopy",
            Modality::RetinalOct => "retinal oct",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: u32,
}

/// Marks a manifest as a corrupted derivative of a clean one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionOrigin {
    pub kind: CorruptionKind,
    pub severity: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub modality: Modality,
    pub class_names: Vec<String>,
    pub items: Vec<ManifestItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionOrigin>,
    /// Directory the relative item paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    /// Checks every manifest invariant, reporting the first violation.
    ///
    /// `path` is only used for error context.
    pub fn validate(&self, path: &Path) -> Result<(), DataError> {
        if self.dataset_name.is_empty() {
            return Err(DataError::schema(path, "dataset_name is empty"));
        }
        if self.class_names.is_empty() {
            return Err(DataError::schema(path, "class_names is empty"));
        }
        let mut seen = HashSet::with_capacity(self.items.len());
        for (row, item) in self.items.iter().enumerate() {
            if item.id.is_empty() {
                return Err(DataError::schema(path, format!("item {row}: empty id")));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(DataError::DuplicateItem {
                    path: path.into(),
                    row,
                    item_id: item.id.clone(),
                });
            }
            if item.label as usize >= self.class_names.len() {
                return Err(DataError::LabelOutOfRange {
                    path: path.into(),
                    row,
                    item_id: item.id.clone(),
                    label: item.label,
                    num_classes: self.class_names.len(),
                });
            }
        }
        if let Some(origin) = self.corruption {
            if !(1..=5).contains(&origin.severity) {
                return Err(DataError::schema(
                    path,
                    format!("corruption severity {} outside 1..=5", origin.severity),
                ));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn resolve(&self, item: &ManifestItem) -> PathBuf {
        self.root.join(&item.path)
    }

    /// Item indices grouped by label, in manifest order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_names.len()];
        for (i, item) in self.items.iter().enumerate() {
            groups[item.label as usize].push(i);
        }
        groups
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| DataError::schema(path, format!("line {} column {}: {e}", e.line(), e.column())))?;
    manifest.validate(path)?;
    manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

/// Writes pretty-printed JSON. The write goes through a temporary sibling
/// file and a rename, so a reader never observes a half-written manifest.
pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    manifest.validate(path)?;
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| DataError::schema(path, e.to_string()))?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| DataError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| DataError::io(path, e))
}
