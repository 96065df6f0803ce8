use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corruptions::CorruptionKind;
use crate::datamodel::DataError;

pub const PREDICTION_LOG_HEADER: [&str; 5] = ["item_id", "corruption", "severity", "true_label", "pred_label"];

/// Either the clean test set or one corruption kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionTag {
    Clean,
    Corrupted(CorruptionKind),
}

impl CorruptionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionTag::Clean => "clean",
            CorruptionTag::Corrupted(kind) => kind.as_str(),
        }
    }
}

impl fmt::Display for CorruptionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "clean" {
            Ok(CorruptionTag::Clean)
        } else {
            s.parse().map(CorruptionTag::Corrupted)
        }
    }
}

impl Serialize for CorruptionTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CorruptionTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub item_id: String,
    pub corruption: CorruptionTag,
    pub severity: u8,
    pub true_label: u32,
    pub pred_label: u32,
}

impl PredictionRow {
    pub fn check(&self) -> Result<(), String> {
        match (self.corruption, self.severity) {
            (CorruptionTag::Clean, 0) => Ok(()),
            (CorruptionTag::Clean, s) => Err(format!("clean row with severity {s}")),
            (CorruptionTag::Corrupted(k), 0) => Err(format!("{k} row with severity 0")),
            (CorruptionTag::Corrupted(_), 1..=5) => Ok(()),
            (CorruptionTag::Corrupted(k), s) => Err(format!("{k} row with severity {s} outside 1..=5")),
        }
    }

    pub fn is_correct(&self) -> bool {
        self.true_label == self.pred_label
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionLog {
    pub rows: Vec<PredictionRow>,
}

impl PredictionLog {
    pub fn new(rows: Vec<PredictionRow>) -> Result<Self, DataError> {
        for (i, row) in rows.iter().enumerate() {
            row.check().map_err(|message| DataError::LogRow {
                path: "<memory>".into(),
                row: i,
                message,
            })?;
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_prediction_log(path: impl AsRef<Path>) -> Result<PredictionLog, DataError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, 0, e))?.clone();
    if headers.iter().ne(PREDICTION_LOG_HEADER) {
        return Err(DataError::schema(
            path,
            format!(
                "header must be `{}`, got `{}`",
                PREDICTION_LOG_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<PredictionRow>().enumerate() {
        // data rows are 1-based after the header line
        let row = record.map_err(|e| csv_error(path, i + 1, e))?;
        row.check().map_err(|message| DataError::LogRow {
            path: path.into(),
            row: i + 1,
            message,
        })?;
        rows.push(row);
    }
    Ok(PredictionLog { rows })
}

pub fn save_prediction_log(log: &PredictionLog, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    for row in &log.rows {
        writer.serialize(row).map_err(|e| csv_error(path, 0, e))?;
    }
    writer.flush().map_err(|e| DataError::io(path, e))
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> DataError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => DataError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        DataError::LogRow {
            path: path.into(),
            row,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        let log = PredictionLog::new(vec![
            PredictionRow {
                item_id: "a".into(),
                corruption: CorruptionTag::Clean,
                severity: 0,
                true_label: 1,
                pred_label: 1,
            },
            PredictionRow {
                item_id: "a".into(),
                corruption: CorruptionTag::Corrupted(CorruptionKind::MotionBlur),
                severity: 4,
                true_label: 1,
                pred_label: 0,
            },
        ])
        .unwrap();
        save_prediction_log(&log, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("item_id,corruption,severity,true_label,pred_label\n"));
        assert!(text.contains("a,motion_blur,4,1,0"));
        assert_eq!(load_prediction_log(&p).unwrap(), log);
    }

    #[test]
    fn severity_must_match_tag() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "item_id,corruption,severity,true_label,pred_label\na,clean,2,0,0\n").unwrap();
        assert!(matches!(load_prediction_log(&p), Err(DataError::LogRow { row: 1, .. })));
        std::fs::write(
            &p,
            "item_id,corruption,severity,true_label,pred_label\na,contrast,0,0,0\n",
        )
        .unwrap();
        assert!(load_prediction_log(&p).is_err());
        std::fs::write(&p, "item_id,corruption,severity,true_label,pred_label\na,fog,1,0,0\n").unwrap();
        assert!(load_prediction_log(&p).is_err());
        std::fs::write(&p, "id,corruption,severity,true_label,pred_label\n").unwrap();
        assert!(matches!(load_prediction_log(&p), Err(DataError::Schema { .. })));
    }
}
