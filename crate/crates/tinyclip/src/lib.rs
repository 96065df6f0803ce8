//! A small dual-encoder image classifier with LoRA adapters on the visual
//! attention projections.
//!
//! The visual side is a pre-norm ViT whose Q/K/V weights carry additive
//! low-rank adapters `W + A·B`; the text side is a frozen table of seeded
//! prompt embeddings. Only the adapters are ever trained.

mod backward;
mod config;
mod encoder;
mod error;
mod forward;

pub mod fewshot;
pub mod loss;
pub mod prompts;
pub mod toy;
pub mod train;
pub mod weights;

use ndarray::{LinalgScalar, ScalarOperand};

use corruptbench_core::Scalar;

pub use backward::{loss_gradients, AdapterGradient, LoraGradients};
pub use config::{count_lora_params, EncoderConfig, ParamCount, TrainConfig};
pub use encoder::{BaseWeights, LayerAdapters, LayerWeights, LoraAdapter, VisualEncoder};
pub use error::ModelError;
pub use fewshot::{few_shot_indices, few_shot_sample};
pub use forward::{encode_batch, encode_image, patchify, predict_batch, zero_shot_predict};
pub use loss::{finetune_loss, similarity, softmax};
pub use prompts::{prompt_embeddings, PromptTable, DEFAULT_TEMPLATE};
pub use train::{train_few_shot, train_on_samples, TrainOutcome};

/// Element type usable by the encoder: a core scalar that ndarray can multiply.
pub trait TensorScalar: Scalar + LinalgScalar + ScalarOperand {}

impl<T: Scalar + LinalgScalar + ScalarOperand> TensorScalar for T {}

pub type Encoder = VisualEncoder<f32>;
pub type Encoder64 = VisualEncoder<f64>;
pub type Prompts = PromptTable<f32>;
pub type Prompts64 = PromptTable<f64>;
