//! Adam on the adapter factors only.

use ndarray::Array2;
use rand::seq::SliceRandom;

use corruptbench_core::datamodel::{load_image, DatasetManifest, ImageBuffer};
use corruptbench_core::rng::{kernel_rng, mix_seed};

use crate::backward::loss_gradients;
use crate::config::TrainConfig;
use crate::encoder::VisualEncoder;
use crate::error::ModelError;
use crate::fewshot::few_shot_sample;
use crate::prompts::PromptTable;
use crate::TensorScalar;

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub encoder: VisualEncoder<T>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

struct Adam<T> {
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
    t: i32,
}

fn parameters<T: TensorScalar>(enc: &mut VisualEncoder<T>) -> Vec<&mut Array2<T>> {
    enc.adapters
        .iter_mut()
        .flat_map(|l| l.iter_mut())
        .flat_map(|a| [&mut a.a, &mut a.b])
        .collect()
}

impl<T: TensorScalar> Adam<T> {
    fn new(enc: &mut VisualEncoder<T>) -> Self {
        let zeros: Vec<Array2<T>> = parameters(enc).into_iter().map(|p| Array2::zeros(p.dim())).collect();
        Self {
            v: zeros.clone(),
            m: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: Vec<&mut Array2<T>>, grads: Vec<&Array2<T>>, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = T::of(cfg.learning_rate);
        let eps = T::of(cfg.epsilon);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Tunes the adapters of a copy of `enc` on every given sample.
///
/// Batch order is a seeded shuffle per epoch. Base weights and the prompt
/// table are never written.
pub fn train_on_samples<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    samples: &[(ImageBuffer<T>, usize)],
    table: &PromptTable<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, ModelError> {
    cfg.validate()?;
    let mut encoder = enc.clone();
    let mut adam = Adam::new(&mut encoder);
    let tau = T::of(encoder.config.temperature);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut steps = 0;
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut kernel_rng(mix_seed(cfg.seed, 0x4550_0000 + epoch as u64)));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&ImageBuffer<T>, usize)> = chunk.iter().map(|&i| (&samples[i].0, samples[i].1)).collect();
            let grads = loss_gradients(&encoder, &batch, table, tau)?;
            let loss = grads.loss.as_f64();
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            total += loss * chunk.len() as f64;
            let flat: Vec<&Array2<T>> = grads.layers.iter().flatten().flat_map(|g| [&g.a, &g.b]).collect();
            adam.step(parameters(&mut encoder), flat, cfg);
            steps += 1;
        }
        if !samples.is_empty() {
            epoch_losses.push(total / samples.len() as f64);
        }
    }
    Ok(TrainOutcome {
        encoder,
        epoch_losses,
        steps,
    })
}

/// Loads a stratified `cfg.percent` subset of `manifest` and tunes on it.
pub fn train_few_shot<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    manifest: &DatasetManifest,
    table: &PromptTable<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, ModelError> {
    cfg.validate()?;
    if manifest.num_classes() != table.len() {
        return Err(ModelError::DimensionMismatch {
            expected: table.len(),
            got: manifest.num_classes(),
        });
    }
    let items = few_shot_sample(manifest, cfg.percent, cfg.seed)?;
    let samples = items
        .iter()
        .map(|item| Ok((load_image(manifest.resolve(item))?, item.label as usize)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    train_on_samples(enc, &samples, table, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::{prompt_embeddings, DEFAULT_TEMPLATE};
    use crate::EncoderConfig;
    use corruptbench_core::synth::shapes_dataset;

    fn setup() -> (VisualEncoder<f32>, Vec<(ImageBuffer<f32>, usize)>, PromptTable<f32>) {
        let mut cfg = EncoderConfig::toy();
        cfg.image_size = 16;
        let enc = VisualEncoder::seeded(&cfg, 5, 6).unwrap();
        let data = shapes_dataset(16, 24, 1);
        let table = prompt_embeddings(&["d", "s", "c", "t"], "synthetic", DEFAULT_TEMPLATE, 2, cfg.embed_dim).unwrap();
        (enc, data, table)
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (enc, data, table) = setup();
        let out = train_on_samples(
            &enc,
            &data,
            &table,
            &TrainConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.encoder, enc);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn only_adapters_move() {
        let (enc, data, table) = setup();
        let base = enc.base.checksum();
        let prompts = table.checksum();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            learning_rate: 1e-3,
            ..Default::default()
        };
        let out = train_on_samples(&enc, &data, &table, &cfg).unwrap();
        assert_eq!(out.encoder.base.checksum(), base);
        assert_eq!(table.checksum(), prompts);
        assert_ne!(out.encoder.adapter_checksum(), enc.adapter_checksum());
        assert_eq!(out.steps, 9);
        assert!(out.epoch_losses.iter().all(|l| l.is_finite()));
        let again = train_on_samples(&enc, &data, &table, &cfg).unwrap();
        assert_eq!(again.encoder, out.encoder);
    }
}
