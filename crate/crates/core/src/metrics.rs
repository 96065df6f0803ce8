//! Robustness arithmetic: Top-1 error, corruption error (CE), mean CE,
//! clean-error ratio and average accuracy.
//!
//! Accuracies and errors are fractions in `[0, 1]`; CE, mCE, clean error and
//! average accuracy are reported in percent; `*_fraction` accessors give raw ratios.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruptions::{CorruptionKind, Severity};
use crate::datamodel::{CorruptionTag, DataError, PredictionLog};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction log is empty")]
    EmptyLog,
    #[error("no clean (severity 0) rows")]
    MissingClean,
    #[error("duplicate row for item `{item_id}` in {tag} severity {severity}")]
    DuplicateRow {
        item_id: String,
        tag: CorruptionTag,
        severity: u8,
    },
    #[error("item `{item_id}` has true label {first} in one row and {second} in another")]
    InconsistentLabels { item_id: String, first: u32, second: u32 },
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("baseline {0} is zero; the ratio is undefined")]
    ZeroBaseline(&'static str),
    #[error("expected {expected} per-severity values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("no corruption kinds to average")]
    Empty,
    #[error("{kind} is missing severity {severity}")]
    MissingCell { kind: CorruptionKind, severity: u8 },
    #[error("model and baseline grids cover different cells")]
    CellMismatch,
    #[error("grid row {row}: {message}")]
    GridRow { row: usize, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

fn unit<T: Scalar>(v: T) -> Result<T, MetricsError> {
    if v >= T::zero() && v <= T::one() {
        Ok(v)
    } else {
        Err(MetricsError::OutOfRange(v.as_f64()))
    }
}

/// Per-cell Top-1 accuracies plus clean accuracy for one model on one dataset.
///
/// The grid declares the cells it covers by the keys of `cells`; a complete
/// grid has all 7 standard kinds at all 5 severities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid<T> {
    pub model_id: String,
    pub dataset_id: String,
    pub clean_acc: T,
    pub cells: BTreeMap<(CorruptionKind, Severity), T>,
}

impl<T: Scalar> AccuracyGrid<T> {
    pub fn new(clean_acc: T, cells: BTreeMap<(CorruptionKind, Severity), T>) -> Result<Self, MetricsError> {
        unit(clean_acc)?;
        for &v in cells.values() {
            unit(v)?;
        }
        Ok(Self {
            model_id: String::new(),
            dataset_id: String::new(),
            clean_acc,
            cells,
        })
    }

    pub fn with_ids(mut self, model_id: impl Into<String>, dataset_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self.dataset_id = dataset_id.into();
        self
    }

    /// Expands per-kind average accuracies to five equal severity cells.
    ///
    /// Exact for CE: both severity sums scale by the same factor of five.
    pub fn from_kind_averages(clean_acc: T, averages: &[(CorruptionKind, T)]) -> Result<Self, MetricsError> {
        let mut cells = BTreeMap::new();
        for &(kind, acc) in averages {
            for s in Severity::ALL {
                cells.insert((kind, s), acc);
            }
        }
        Self::new(clean_acc, cells)
    }

    /// Kinds present, in canonical order.
    pub fn kinds(&self) -> Vec<CorruptionKind> {
        let mut kinds: Vec<_> = self.cells.keys().map(|&(k, _)| k).collect();
        kinds.dedup();
        kinds
    }

    pub fn is_complete(&self) -> bool {
        CorruptionKind::STANDARD
            .iter()
            .all(|&k| Severity::ALL.iter().all(|&s| self.cells.contains_key(&(k, s))))
    }

    /// Accuracies at severities 1..=5 for `kind`.
    pub fn severity_accuracies(&self, kind: CorruptionKind) -> Result<[T; 5], MetricsError> {
        let mut out = [T::zero(); 5];
        for s in Severity::ALL {
            out[s.index()] = *self.cells.get(&(kind, s)).ok_or(MetricsError::MissingCell {
                kind,
                severity: s.get(),
            })?;
        }
        Ok(out)
    }

    /// Reads the `kind,severity,accuracy` format; severity 0 is the clean row.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| grid_csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| grid_csv_error(path, e))?.clone();
        if headers.iter().ne(["kind", "severity", "accuracy"]) {
            return Err(DataError::Schema {
                path: path.into(),
                message: "header must be `kind,severity,accuracy`".into(),
            }
            .into());
        }
        let mut clean = None;
        let mut cells = BTreeMap::new();
        for (i, record) in reader.deserialize::<(String, u8, f64)>().enumerate() {
            let row = i + 1;
            let bad = |message: String| MetricsError::GridRow { row, message };
            let (kind, severity, acc) = record.map_err(|e| bad(e.to_string()))?;
            let acc = unit(T::of(acc)).map_err(|e| bad(e.to_string()))?;
            match (kind.as_str(), severity) {
                ("clean", 0) => {
                    if clean.replace(acc).is_some() {
                        return Err(bad("duplicate clean row".into()));
                    }
                }
                ("clean", s) => return Err(bad(format!("clean row with severity {s}"))),
                (name, s) => {
                    let kind: CorruptionKind = name.parse().map_err(bad)?;
                    let severity = Severity::new(s).map_err(bad)?;
                    if cells.insert((kind, severity), acc).is_some() {
                        return Err(bad(format!("duplicate cell {kind} severity {s}")));
                    }
                }
            }
        }
        let clean = clean.ok_or(MetricsError::MissingClean)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::new(clean, cells)?.with_ids(stem, ""))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,severity,accuracy\n");
        let _ = writeln!(out, "clean,0,{}", self.clean_acc);
        for (&(kind, s), acc) in &self.cells {
            let _ = writeln!(out, "{kind},{s},{acc}");
        }
        out
    }
}

fn grid_csv_error(path: &Path, e: csv::Error) -> MetricsError {
    let message = e.to_string();
    MetricsError::Data(match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io {
            path: path.into(),
            source,
        },
        _ => DataError::Schema {
            path: path.into(),
            message,
        },
    })
}

/// Counts correct predictions per (corruption, severity) cell.
pub fn score_predictions<T: Scalar>(log: &PredictionLog) -> Result<AccuracyGrid<T>, MetricsError> {
    if log.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let mut labels: HashMap<&str, u32> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    let mut counts: BTreeMap<(CorruptionTag, u8), (usize, usize)> = BTreeMap::new();
    for row in &log.rows {
        row.check()
            .map_err(|message| MetricsError::GridRow { row: 0, message })?;
        if !seen.insert((row.item_id.as_str(), row.corruption, row.severity)) {
            return Err(MetricsError::DuplicateRow {
                item_id: row.item_id.clone(),
                tag: row.corruption,
                severity: row.severity,
            });
        }
        let first = *labels.entry(row.item_id.as_str()).or_insert(row.true_label);
        if first != row.true_label {
            return Err(MetricsError::InconsistentLabels {
                item_id: row.item_id.clone(),
                first,
                second: row.true_label,
            });
        }
        let cell = counts.entry((row.corruption, row.severity)).or_default();
        cell.0 += row.is_correct() as usize;
        cell.1 += 1;
    }
    let ratio = |(correct, total): (usize, usize)| T::of(correct as f64) / T::of(total as f64);
    let clean = counts
        .get(&(CorruptionTag::Clean, 0))
        .copied()
        .map(ratio)
        .ok_or(MetricsError::MissingClean)?;
    let mut cells = BTreeMap::new();
    for (&(tag, severity), &count) in &counts {
        if let CorruptionTag::Corrupted(kind) = tag {
            let severity = Severity::new(severity).expect("row severities were checked");
            cells.insert((kind, severity), ratio(count));
        }
    }
    AccuracyGrid::new(clean, cells)
}

/// `1 - acc`.
pub fn top1_error<T: Scalar>(acc: T) -> Result<T, MetricsError> {
    Ok(T::one() - unit(acc)?)
}

/// `100 · Σ_s model_errors[s] / Σ_s baseline_errors[s]` over five severities.
pub fn corruption_error<T: Scalar>(model_errors: &[T], baseline_errors: &[T]) -> Result<T, MetricsError> {
    for errs in [model_errors, baseline_errors] {
        if errs.len() != 5 {
            return Err(MetricsError::Length {
                expected: 5,
                got: errs.len(),
            });
        }
        for &e in errs {
            unit(e)?;
        }
    }
    let num: T = model_errors.iter().copied().sum();
    let den: T = baseline_errors.iter().copied().sum();
    if den == T::zero() {
        return Err(MetricsError::ZeroBaseline("corruption error"));
    }
    Ok(T::of(100.0) * num / den)
}

/// Arithmetic mean of per-kind CE values.
pub fn mean_corruption_error<T: Scalar>(ce_by_kind: &BTreeMap<CorruptionKind, T>) -> Result<T, MetricsError> {
    if ce_by_kind.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(ce_by_kind.values().copied().sum::<T>() / T::of(ce_by_kind.len() as f64))
}

/// `100 · model_clean_err / baseline_clean_err`.
pub fn clean_error_ratio<T: Scalar>(model_clean_err: T, baseline_clean_err: T) -> Result<T, MetricsError> {
    unit(model_clean_err)?;
    if unit(baseline_clean_err)? == T::zero() {
        return Err(MetricsError::ZeroBaseline("clean error"));
    }
    Ok(T::of(100.0) * model_clean_err / baseline_clean_err)
}

/// `100 ·` mean over kinds of the mean accuracy over five severities.
pub fn average_accuracy<T: Scalar>(grid: &AccuracyGrid<T>) -> Result<T, MetricsError> {
    let kinds = grid.kinds();
    if kinds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let five = T::of(5.0);
    let mut total = T::zero();
    for &kind in &kinds {
        let accs = grid.severity_accuracies(kind)?;
        total += accs.iter().copied().sum::<T>() / five;
    }
    Ok(T::of(100.0) * total / T::of(kinds.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport<T> {
    pub model_id: String,
    pub baseline_id: String,
    pub dataset_id: String,
    pub clean_error_pct: T,
    pub ce_pct: BTreeMap<CorruptionKind, T>,
    pub mce_pct: T,
    pub avg_acc_pct: T,
}

impl<T: Scalar> RobustnessReport<T> {
    /// CE of `kind` as a plain ratio rather than percent.
    pub fn ce_fraction(&self, kind: CorruptionKind) -> Option<T> {
        self.ce_pct.get(&kind).map(|&v| v / T::of(100.0))
    }

    pub fn mce_fraction(&self) -> T {
        self.mce_pct / T::of(100.0)
    }

    pub fn clean_error_fraction(&self) -> T {
        self.clean_error_pct / T::of(100.0)
    }

    /// One header line plus one data row.
    pub fn to_csv(&self) -> String {
        let mut header = String::from("model,baseline,dataset,clean");
        let mut row = format!(
            "{},{},{},{:.4}",
            self.model_id, self.baseline_id, self.dataset_id, self.clean_error_pct
        );
        for (kind, ce) in &self.ce_pct {
            let _ = write!(header, ",{kind}");
            let _ = write!(row, ",{ce:.4}");
        }
        header.push_str(",mce,avg_acc\n");
        let _ = writeln!(row, ",{:.4},{:.4}", self.mce_pct, self.avg_acc_pct);
        header + &row
    }
}

/// Clean error ratio, per-kind CE, mCE and average accuracy of `model`
/// relative to `baseline`. Both grids must cover the same cells.
pub fn build_report<T: Scalar>(
    model: &AccuracyGrid<T>,
    baseline: &AccuracyGrid<T>,
) -> Result<RobustnessReport<T>, MetricsError> {
    if model.cells.len() != baseline.cells.len() || model.cells.keys().ne(baseline.cells.keys()) {
        return Err(MetricsError::CellMismatch);
    }
    let errors = |accs: [T; 5]| -> Result<Vec<T>, MetricsError> { accs.into_iter().map(top1_error).collect() };
    let mut ce_pct = BTreeMap::new();
    for kind in model.kinds() {
        let m = errors(model.severity_accuracies(kind)?)?;
        let b = errors(baseline.severity_accuracies(kind)?)?;
        ce_pct.insert(kind, corruption_error(&m, &b)?);
    }
    Ok(RobustnessReport {
        model_id: model.model_id.clone(),
        baseline_id: baseline.model_id.clone(),
        dataset_id: model.dataset_id.clone(),
        clean_error_pct: clean_error_ratio(top1_error(model.clean_acc)?, top1_error(baseline.clean_acc)?)?,
        mce_pct: mean_corruption_error(&ce_pct)?,
        ce_pct,
        avg_acc_pct: average_accuracy(model)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::PredictionRow;
    use CorruptionKind::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn top1_error_values() {
        assert!(close(top1_error(0.1781).unwrap(), 0.8219, 1e-12));
        assert_eq!(top1_error(1.0).unwrap(), 0.0);
        assert_eq!(top1_error(0.0).unwrap(), 1.0);
        assert!(top1_error(1.2).is_err());
        assert!(top1_error(-0.1f32).is_err());
    }

    #[test]
    fn corruption_error_values() {
        let ce = corruption_error(&[0.6770; 5], &[0.8242; 5]).unwrap();
        assert!(close(ce, 82.14, 0.01), "{ce}");
        assert!(close(ce, 82.1, 0.15));
        let e = [0.3, 0.4, 0.5, 0.6, 0.7];
        assert!(close(corruption_error(&e, &e).unwrap(), 100.0, 1e-12));
        assert_eq!(corruption_error(&[0.0; 5], &e).unwrap(), 0.0);
        assert!(matches!(
            corruption_error(&e, &[0.0; 5]),
            Err(MetricsError::ZeroBaseline(_))
        ));
        assert!(matches!(
            corruption_error(&e[..4], &e[..4]),
            Err(MetricsError::Length { .. })
        ));
    }

    #[test]
    fn mean_ce_values() {
        let ces: BTreeMap<_, _> = CorruptionKind::STANDARD
            .into_iter()
            .zip([82.1, 98.7, 70.1, 43.3, 40.1, 64.1, 92.5])
            .collect();
        assert!(close(mean_corruption_error(&ces).unwrap(), 70.1, 0.15));
        let single: BTreeMap<_, _> = [(Contrast, 42.0)].into_iter().collect();
        assert_eq!(mean_corruption_error(&single).unwrap(), 42.0);
        assert!(mean_corruption_error::<f64>(&BTreeMap::new()).is_err());
    }

    #[test]
    fn clean_ratio_values() {
        let r = clean_error_ratio(0.1995, 0.8219).unwrap();
        assert!(close(r, 24.27, 0.01) && close(r, 24.3, 0.15));
        assert_eq!(clean_error_ratio(0.5, 0.5).unwrap(), 100.0);
        assert_eq!(clean_error_ratio(0.0, 0.5).unwrap(), 0.0);
        assert!(clean_error_ratio(0.5, 0.0).is_err());
    }

    #[test]
    fn average_accuracy_values() {
        let avgs: Vec<_> = CorruptionKind::STANDARD
            .into_iter()
            .zip([0.3230, 0.1906, 0.4395, 0.6411, 0.6760, 0.4798, 0.2410])
            .collect();
        let grid = AccuracyGrid::from_kind_averages(0.8005, &avgs).unwrap();
        assert!(grid.is_complete());
        assert!(close(average_accuracy(&grid).unwrap(), 42.73, 0.005));

        let flat = AccuracyGrid::from_kind_averages(0.5, &[(Brightness, 0.25), (Pixelate, 0.25)]).unwrap();
        assert!(!flat.is_complete());
        assert!(close(average_accuracy(&flat).unwrap(), 25.0, 1e-12));

        let mut partial = flat.clone();
        partial.cells.remove(&(Pixelate, Severity::new(3).unwrap()));
        assert!(matches!(
            average_accuracy(&partial),
            Err(MetricsError::MissingCell {
                kind: Pixelate,
                severity: 3
            })
        ));
    }

    #[test]
    fn average_accuracy_equals_flat_mean_for_equal_counts() {
        let mut cells = BTreeMap::new();
        let mut flat = 0.0;
        for (i, kind) in [GaussianNoise, ZoomBlur].into_iter().enumerate() {
            for s in Severity::ALL {
                let v = ((i * 7 + s.get() as usize * 3) % 10) as f64 / 10.0;
                flat += v;
                cells.insert((kind, s), v);
            }
        }
        let grid = AccuracyGrid::new(0.9, cells).unwrap();
        assert!(close(average_accuracy(&grid).unwrap(), 100.0 * flat / 10.0, 1e-12));
    }

    fn row(id: &str, tag: CorruptionTag, severity: u8, t: u32, p: u32) -> PredictionRow {
        PredictionRow {
            item_id: id.into(),
            corruption: tag,
            severity,
            true_label: t,
            pred_label: p,
        }
    }

    #[test]
    fn scoring_counts_cells() {
        let g = CorruptionTag::Corrupted(GaussianNoise);
        let log = PredictionLog::new(vec![
            row("a", CorruptionTag::Clean, 0, 1, 1),
            row("b", CorruptionTag::Clean, 0, 0, 1),
            row("a", g, 2, 1, 1),
            row("b", g, 2, 0, 0),
            row("c", g, 2, 0, 0),
            row("d", g, 2, 1, 0),
        ])
        .unwrap();
        let grid: AccuracyGrid<f64> = score_predictions(&log).unwrap();
        assert_eq!(grid.clean_acc, 0.5);
        assert_eq!(grid.cells[&(GaussianNoise, Severity::new(2).unwrap())], 0.75);
        assert_eq!(grid.cells.len(), 1);
    }

    #[test]
    fn scoring_errors() {
        assert!(matches!(
            score_predictions::<f64>(&PredictionLog::default()),
            Err(MetricsError::EmptyLog)
        ));
        let g = CorruptionTag::Corrupted(Contrast);
        let no_clean = PredictionLog::new(vec![row("a", g, 1, 0, 0)]).unwrap();
        assert!(matches!(
            score_predictions::<f64>(&no_clean),
            Err(MetricsError::MissingClean)
        ));
        let dup = PredictionLog::new(vec![
            row("a", CorruptionTag::Clean, 0, 0, 0),
            row("a", CorruptionTag::Clean, 0, 0, 1),
        ])
        .unwrap();
        assert!(matches!(
            score_predictions::<f64>(&dup),
            Err(MetricsError::DuplicateRow { .. })
        ));
        let labels = PredictionLog::new(vec![row("a", CorruptionTag::Clean, 0, 0, 0), row("a", g, 3, 2, 0)]).unwrap();
        assert!(matches!(
            score_predictions::<f64>(&labels),
            Err(MetricsError::InconsistentLabels { .. })
        ));
    }

    #[test]
    fn report_against_self_is_one_hundred() {
        let avgs: Vec<_> = CorruptionKind::STANDARD
            .into_iter()
            .zip([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
            .collect();
        let grid = AccuracyGrid::from_kind_averages(0.8, &avgs)
            .unwrap()
            .with_ids("clip", "cell");
        let report = build_report(&grid, &grid).unwrap();
        assert_eq!(report.clean_error_pct, 100.0);
        assert!(report.ce_pct.values().all(|&v| close(v, 100.0, 1e-12)));
        assert!(close(report.mce_pct, 100.0, 1e-12));
        assert_eq!(report.baseline_id, "clip");
        assert!(report
            .to_csv()
            .starts_with("model,baseline,dataset,clean,gaussian_noise,"));
    }

    #[test]
    fn report_requires_matching_cells() {
        let a = AccuracyGrid::from_kind_averages(0.8, &[(Contrast, 0.5)]).unwrap();
        let b = AccuracyGrid::from_kind_averages(0.8, &[(Brightness, 0.5)]).unwrap();
        assert!(matches!(build_report(&a, &b), Err(MetricsError::CellMismatch)));
    }
}
