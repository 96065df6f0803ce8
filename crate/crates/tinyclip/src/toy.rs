//! End-to-end few-shot experiment on the synthetic shapes dataset.
//!
//! A seeded base encoder is evaluated zero-shot, its adapters are tuned on a
//! stratified subset of the training split, and both models are scored on
//! the clean test split and on every corruption at every severity.

use std::collections::BTreeMap;

use serde::Serialize;

use corruptbench_core::benchgen::derive_item_seed;
use corruptbench_core::corruptions::apply_corruption;
use corruptbench_core::datamodel::ImageBuffer;
use corruptbench_core::metrics::build_report;
use corruptbench_core::rng::mix_seed;
use corruptbench_core::synth::{shapes_dataset, SHAPE_CLASSES};
use corruptbench_core::{AccuracyGrid, CorruptionKind, CorruptionSpec, RobustnessReport, Severity};

use crate::config::{EncoderConfig, TrainConfig};
use crate::encoder::VisualEncoder;
use crate::error::ModelError;
use crate::fewshot::few_shot_indices;
use crate::forward::predict_batch;
use crate::prompts::{prompt_embeddings, PromptTable, DEFAULT_TEMPLATE};
use crate::train::train_on_samples;

/// Batch size for the toy run. A few hundred samples at the default learning
/// rate need many optimizer steps to move the adapters.
pub const TOY_BATCH_SIZE: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct ToyConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub train_size: usize,
    pub test_size: usize,
    /// Test images scored per corruption set; `0` skips corrupted evaluation.
    pub corrupted_eval: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::toy(),
            train: TrainConfig {
                batch_size: TOY_BATCH_SIZE,
                ..TrainConfig::default()
            },
            train_size: 2000,
            test_size: 400,
            corrupted_eval: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyRun {
    pub seed: u64,
    pub percent: f64,
    pub few_shot_items: usize,
    pub base_clean_acc: f64,
    pub tuned_clean_acc: f64,
    pub epoch_losses: Vec<f64>,
    /// Tuned model against the frozen base.
    pub report: Option<RobustnessReport<f64>>,
}

fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64
}

pub fn shapes_table(cfg: &EncoderConfig, seed: u64) -> Result<PromptTable<f32>, ModelError> {
    prompt_embeddings(
        &SHAPE_CLASSES,
        "synthetic shapes",
        DEFAULT_TEMPLATE,
        seed,
        cfg.embed_dim,
    )
}

pub fn run_toy(cfg: &ToyConfig, seed: u64) -> Result<ToyRun, ModelError> {
    let size = cfg.encoder.image_size;
    let train = shapes_dataset::<f32>(size, cfg.train_size, mix_seed(seed, 1));
    let test = shapes_dataset::<f32>(size, cfg.test_size, mix_seed(seed, 2));
    let base = VisualEncoder::<f32>::seeded(&cfg.encoder, seed, mix_seed(seed, 3))?;
    let table = shapes_table(&cfg.encoder, seed)?;

    let labels: Vec<usize> = train.iter().map(|s| s.1).collect();
    let subset: Vec<(ImageBuffer<f32>, usize)> =
        few_shot_indices(&labels, SHAPE_CLASSES.len(), cfg.train.percent, seed)?
            .into_iter()
            .map(|i| train[i].clone())
            .collect();
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let outcome = train_on_samples(&base, &subset, &table, &train_cfg)?;
    let tuned = outcome.encoder;

    let (test_imgs, test_labels): (Vec<_>, Vec<_>) = test.into_iter().unzip();
    let base_clean_acc = accuracy(&predict_batch(&base, &test_imgs, &table)?, &test_labels);
    let tuned_clean_acc = accuracy(&predict_batch(&tuned, &test_imgs, &table)?, &test_labels);

    let report = if cfg.corrupted_eval > 0 {
        let n = cfg.corrupted_eval.min(test_imgs.len());
        let mut base_cells = BTreeMap::new();
        let mut tuned_cells = BTreeMap::new();
        for kind in CorruptionKind::STANDARD {
            for severity in Severity::ALL {
                let corrupted: Vec<ImageBuffer<f32>> = test_imgs[..n]
                    .iter()
                    .enumerate()
                    .map(|(i, img)| {
                        let s = derive_item_seed(seed, "shapes", kind, severity, &i.to_string());
                        apply_corruption(img, &CorruptionSpec::new(kind, severity, s))
                    })
                    .collect();
                let y = &test_labels[..n];
                base_cells.insert(
                    (kind, severity),
                    accuracy(&predict_batch(&base, &corrupted, &table)?, y),
                );
                tuned_cells.insert(
                    (kind, severity),
                    accuracy(&predict_batch(&tuned, &corrupted, &table)?, y),
                );
            }
        }
        let base_grid = AccuracyGrid::new(base_clean_acc, base_cells)?.with_ids("base", "shapes");
        let tuned_grid = AccuracyGrid::new(tuned_clean_acc, tuned_cells)?.with_ids("tuned", "shapes");
        Some(build_report(&tuned_grid, &base_grid)?)
    } else {
        None
    };

    Ok(ToyRun {
        seed,
        percent: cfg.train.percent,
        few_shot_items: subset.len(),
        base_clean_acc,
        tuned_clean_acc,
        epoch_losses: outcome.epoch_losses,
        report,
    })
}
