use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use walkdir::WalkDir;

use corruptbench_core::analysis::{frequency_profile, pixel_histogram};
use corruptbench_core::benchgen::{build_benchmark, BenchError, LAYOUT_FILE};
use corruptbench_core::corruptions::severity_table_csv;
use corruptbench_core::datamodel::{load_image, load_manifest, load_prediction_log, ImageCache, Split};
use corruptbench_core::metrics::{build_report, score_predictions};
use corruptbench_core::rng::mix_seed;
use corruptbench_core::{
    AccuracyGrid, BenchmarkLayout, BenchmarkOptions, CorruptionKind, CorruptionTag, DatasetManifest, ImageBuffer,
    PredictionLog, PredictionRow, Severity,
};
use tinyclip::prompts::PromptSpec;
use tinyclip::weights::{load_weights, save_weights};
use tinyclip::{
    count_lora_params, predict_batch, prompt_embeddings, train_few_shot, EncoderConfig, TrainConfig, VisualEncoder,
    DEFAULT_TEMPLATE,
};

use crate::error::CliError;
use crate::{AnalyzeArgs, AnalyzeMode, CommandOutcome, CorruptArgs, EvaluateArgs, PredictArgs, TablesArgs, TrainArgs};

/// Writes through a temporary sibling so a failed run never leaves a
/// truncated artifact behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::runtime(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(fail)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(fail)?;
    fs::rename(&tmp, path).map_err(fail)
}

fn cache() -> Result<Option<ImageCache>, CliError> {
    ImageCache::from_env().map_err(|e| CliError::runtime(format!("CORRUPTBENCH_CACHE: {e}")))
}

fn read_image<T: corruptbench_core::Scalar>(
    path: &Path,
    cache: Option<&ImageCache>,
) -> Result<ImageBuffer<T>, CliError> {
    Ok(match cache {
        Some(c) => c.load(path)?,
        None => load_image(path)?,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn corrupt(args: &CorruptArgs, seed: u64) -> Result<CommandOutcome, CliError> {
    let kinds = if args.kinds.is_empty() {
        CorruptionKind::STANDARD.to_vec()
    } else {
        args.kinds
            .iter()
            .map(|k| k.parse::<CorruptionKind>().map_err(CliError::usage))
            .collect::<Result<Vec<_>, _>>()?
    };
    let severities = if args.severities.is_empty() {
        Severity::ALL.to_vec()
    } else {
        args.severities
            .iter()
            .map(|&s| Severity::new(s).map_err(CliError::usage))
            .collect::<Result<Vec<_>, _>>()?
    };
    let manifests = args
        .manifests
        .iter()
        .map(load_manifest)
        .collect::<Result<Vec<_>, _>>()?;
    let options = BenchmarkOptions {
        kinds,
        severities,
        keep_going: args.keep_going,
        cache: cache()?,
    };
    let layout_path = args.out.join(LAYOUT_FILE);
    match build_benchmark(&manifests, seed, &args.out, &options) {
        Ok(layout) => {
            let items: usize = layout.entries.iter().map(|e| e.items).sum();
            Ok(CommandOutcome::success(
                format!(
                    "wrote {} corruption sets ({items} images) under {}",
                    layout.entries.len(),
                    args.out.display()
                ),
                vec![layout_path],
                json!({ "sets": layout.entries.len(), "images": items }),
            ))
        }
        Err(BenchError::DatasetsFailed(failures)) => {
            let detail: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.dataset, f.error)).collect();
            Err(CliError::data(format!(
                "{} dataset(s) failed; {} lists them under `failures`\n{}",
                failures.len(),
                layout_path.display(),
                detail.join("\n")
            )))
        }
        Err(BenchError::Data(e @ corruptbench_core::DataError::Io { .. })) if is_output_error(&e, &args.out) => {
            Err(CliError::runtime(e.to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

fn is_output_error(e: &corruptbench_core::DataError, out: &Path) -> bool {
    match e {
        corruptbench_core::DataError::Io { path, .. } => path.starts_with(out),
        _ => false,
    }
}

pub fn evaluate(args: &EvaluateArgs, stdout: &mut dyn Write) -> Result<CommandOutcome, CliError> {
    let (model_path, baseline_path, model, baseline) =
        match (&args.grid, &args.baseline_grid, &args.log, &args.baseline_log) {
            (Some(g), Some(b), _, _) => (
                g,
                b,
                AccuracyGrid::<f64>::load_csv(g)?,
                AccuracyGrid::<f64>::load_csv(b)?,
            ),
            (_, _, Some(l), Some(b)) => {
                let model = score_predictions::<f64>(&load_prediction_log(l)?)?;
                let baseline = score_predictions::<f64>(&load_prediction_log(b)?)?;
                (l, b, model, baseline)
            }
            _ => {
                return Err(CliError::usage(
                    "give either --grid/--baseline-grid or --log/--baseline-log",
                ))
            }
        };
    let dataset = args.dataset_id.clone().unwrap_or_else(|| {
        model_path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let model = model.with_ids(
        args.model_id.clone().unwrap_or_else(|| file_stem(model_path)),
        dataset.clone(),
    );
    let baseline = baseline.with_ids(
        args.baseline_id.clone().unwrap_or_else(|| file_stem(baseline_path)),
        dataset,
    );
    let report = build_report(&model, &baseline)?;
    let summary = format!(
        "{} vs {}: clean {:.2}, mCE {:.2}, average accuracy {:.2}",
        report.model_id, report.baseline_id, report.clean_error_pct, report.mce_pct, report.avg_acc_pct
    );
    let details = serde_json::to_value(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    let mut artifacts = Vec::new();
    match &args.out {
        Some(out) => {
            let text = match out.extension().and_then(|e| e.to_str()) {
                Some("json") => {
                    let mut s = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
                    s.push('\n');
                    s
                }
                Some("csv") => report.to_csv(),
                _ => return Err(CliError::usage("--out must end in .json or .csv")),
            };
            write_atomic(out, text.as_bytes())?;
            artifacts.push(out.clone());
        }
        None => {
            write!(stdout, "{}", report.to_csv()).map_err(|e| CliError::runtime(e.to_string()))?;
        }
    }
    Ok(CommandOutcome::success(summary, artifacts, details))
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::data(format!("{}: not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::data(e.to_string()))?;
        let is_png = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if entry.file_type().is_file() && is_png {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(CliError::data(format!("{}: no PNG files", dir.display())));
    }
    Ok(files)
}

pub fn analyze(args: &AnalyzeArgs) -> Result<CommandOutcome, CliError> {
    let files = png_files(&args.dir)?;
    let cache = cache()?;
    let imgs = files
        .par_iter()
        .map(|p| read_image::<f64>(p, cache.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let (csv, summary, details) = match args.mode {
        AnalyzeMode::Dct => {
            let profile = frequency_profile(&imgs)?;
            (
                profile.to_csv(),
                format!(
                    "{} images: low-frequency share {:.4}, high-frequency share {:.4}",
                    profile.images, profile.low_fraction, profile.high_fraction
                ),
                json!({ "images": profile.images, "low_fraction": profile.low_fraction, "high_fraction": profile.high_fraction }),
            )
        }
        AnalyzeMode::Hist => {
            let hist = pixel_histogram(&imgs)?;
            (
                hist.to_csv(),
                format!(
                    "{} images, {} samples, mean intensity {:.4}",
                    imgs.len(),
                    hist.samples,
                    hist.mean()
                ),
                json!({ "images": imgs.len(), "samples": hist.samples, "mean": hist.mean() }),
            )
        }
    };
    write_atomic(&args.out, csv.as_bytes())?;
    Ok(CommandOutcome::success(summary, vec![args.out.clone()], details))
}

fn training_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    let manifest = load_manifest(path)?;
    if manifest.corruption.is_some() {
        return Err(CliError::data(format!(
            "{}: corrupted sets are for evaluation only",
            path.display()
        )));
    }
    if manifest.split == Some(Split::Test) {
        return Err(CliError::data(format!(
            "{}: refusing to tune on a test split",
            path.display()
        )));
    }
    if manifest.items.is_empty() {
        return Err(CliError::data(format!("{}: no items", path.display())));
    }
    Ok(manifest)
}

pub fn train(args: &TrainArgs, seed: u64) -> Result<CommandOutcome, CliError> {
    let manifest = training_manifest(&args.manifest)?;
    let probe: ImageBuffer<f32> = load_image(manifest.resolve(&manifest.items[0]))?;
    let (h, w, c) = probe.shape();
    if h != w {
        return Err(CliError::data(format!("images must be square, got {h}x{w}")));
    }

    let encoder = match &args.base {
        Some(path) => {
            let (enc, _) = load_weights::<f32>(path)?;
            let config = EncoderConfig {
                lora_rank: args.rank,
                ..enc.config.clone()
            };
            if (config.image_size, config.channels) != (h, c) {
                return Err(CliError::data(format!(
                    "{} expects {s}x{s}x{ch} images, manifest has {h}x{w}x{c}",
                    path.display(),
                    s = config.image_size,
                    ch = config.channels
                )));
            }
            VisualEncoder::with_base(&config, enc.base, mix_seed(seed, 3))?
        }
        None => {
            let config = EncoderConfig {
                image_size: h,
                channels: c,
                patch_size: args.patch_size,
                lora_rank: args.rank,
                ..EncoderConfig::toy()
            };
            VisualEncoder::seeded(&config, seed, mix_seed(seed, 3))?
        }
    };

    let spec = PromptSpec {
        template: DEFAULT_TEMPLATE.to_string(),
        modality: manifest.modality.display_name().to_string(),
        seed,
    };
    let table = prompt_embeddings::<f32, _>(
        &manifest.class_names,
        &spec.modality,
        &spec.template,
        seed,
        encoder.config.embed_dim,
    )?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        percent: args.percent,
        seed,
        ..TrainConfig::default()
    };
    let outcome = train_few_shot(&encoder, &manifest, &table, &cfg)?;
    save_weights(&outcome.encoder, Some(&spec), &args.out).map_err(|e| CliError::runtime(e.to_string()))?;
    let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    Ok(CommandOutcome::success(
        format!(
            "tuned {} adapter parameters for {} steps, final loss {last:.4}",
            outcome.encoder.lora_parameter_count(),
            outcome.steps
        ),
        vec![args.out.clone()],
        json!({ "steps": outcome.steps, "epoch_losses": outcome.epoch_losses }),
    ))
}

pub fn predict(args: &PredictArgs, seed: u64) -> Result<CommandOutcome, CliError> {
    if args.manifests.is_empty() && args.layout.is_none() {
        return Err(CliError::usage("give at least one --manifest or a --layout"));
    }
    let (encoder, spec) = load_weights::<f32>(&args.weights)?;
    let mut paths = args.manifests.clone();
    if let Some(layout) = &args.layout {
        paths.extend(BenchmarkLayout::load(layout)?.manifest_paths());
    }
    let cache = cache()?;
    let mut rows = Vec::new();
    let mut first_classes: Option<Vec<String>> = None;
    for path in &paths {
        let manifest = load_manifest(path)?;
        match &first_classes {
            Some(names) if *names != manifest.class_names => {
                return Err(CliError::data(format!(
                    "{}: class names differ from the first manifest",
                    path.display()
                )));
            }
            Some(_) => {}
            None => first_classes = Some(manifest.class_names.clone()),
        }
        let spec = spec.clone().unwrap_or_else(|| PromptSpec {
            template: DEFAULT_TEMPLATE.to_string(),
            modality: manifest.modality.display_name().to_string(),
            seed,
        });
        let table = prompt_embeddings::<f32, _>(
            &manifest.class_names,
            &spec.modality,
            &spec.template,
            spec.seed,
            encoder.config.embed_dim,
        )?;
        let imgs = manifest
            .items
            .par_iter()
            .map(|item| read_image::<f32>(&manifest.resolve(item), cache.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let preds = predict_batch(&encoder, &imgs, &table)?;
        let (tag, severity) = match manifest.corruption {
            Some(origin) => (CorruptionTag::Corrupted(origin.kind), origin.severity),
            None => (CorruptionTag::Clean, 0),
        };
        rows.extend(manifest.items.iter().zip(preds).map(|(item, p)| PredictionRow {
            item_id: item.id.clone(),
            corruption: tag,
            severity,
            true_label: item.label,
            pred_label: p as u32,
        }));
    }
    let log = PredictionLog::new(rows)?;
    let correct = log.rows.iter().filter(|r| r.is_correct()).count();
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &log.rows {
        writer.serialize(row).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    write_atomic(&args.out, &bytes)?;
    let accuracy = correct as f64 / log.len().max(1) as f64;
    Ok(CommandOutcome::success(
        format!(
            "{} predictions from {} manifest(s), accuracy {accuracy:.4}",
            log.len(),
            paths.len()
        ),
        vec![args.out.clone()],
        json!({ "rows": log.len(), "manifests": paths.len(), "accuracy": accuracy }),
    ))
}

pub fn tables(args: &TablesArgs, stdout: &mut dyn Write) -> Result<CommandOutcome, CliError> {
    let (text, summary) = if args.census {
        let cfg = EncoderConfig {
            num_layers: args.layers,
            model_dim: args.dim,
            lora_rank: args.rank,
            ..EncoderConfig::vit_b16()
        };
        let p = count_lora_params(&cfg);
        (
            format!(
                "layers,dim,rank,trainable,total,percent\n{},{},{},{},{},{:.4}\n",
                args.layers, args.dim, args.rank, p.trainable, p.total, p.percent
            ),
            format!(
                "{} trainable of {} parameters ({:.3}%)",
                p.trainable, p.total, p.percent
            ),
        )
    } else {
        let csv = severity_table_csv(args.include_optional);
        let rows = csv.lines().count() - 1;
        (csv, format!("{rows} corruption kinds x 5 severities"))
    };
    let mut artifacts = Vec::new();
    match &args.out {
        Some(out) => {
            write_atomic(out, text.as_bytes())?;
            artifacts.push(out.clone());
        }
        None => write!(stdout, "{text}").map_err(|e| CliError::runtime(e.to_string()))?,
    }
    Ok(CommandOutcome::success(summary, artifacts, serde_json::Value::Null))
}
