//! JSON weight container.
//!
//! ```text
//! {
//!   "format": "tinyclip-weights",
//!   "version": 1,
//!   "config": { EncoderConfig fields },
//!   "prompts": { "template", "modality", "seed" } | null,
//!   "base_checksum": "<16 hex digits>",
//!   "tensors": [ { "name", "shape": [..], "data": [..] }, .. ]
//! }
//! ```
//!
//! Tensor data is row-major and written as f64, so f32 and f64 weights both
//! round-trip bit-exactly. Adapter tensors are named
//! `layers.{i}.lora.{q,k,v}.{a,b}`; see [`BaseWeights::named_tensors`] for the rest.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::EncoderConfig;
use crate::encoder::{BaseWeights, LayerAdapters, LayerWeights, LoraAdapter, VisualEncoder};
use crate::error::ModelError;
use crate::prompts::PromptSpec;
use crate::TensorScalar;

pub const FORMAT: &str = "tinyclip-weights";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    format: String,
    version: u32,
    config: EncoderConfig,
    prompts: Option<PromptSpec>,
    base_checksum: String,
    tensors: Vec<Tensor>,
}

pub fn save_weights<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    prompts: Option<&PromptSpec>,
    path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let mut tensors: Vec<Tensor> = enc
        .base
        .named_tensors()
        .into_iter()
        .map(|(name, shape, data)| Tensor {
            name,
            shape,
            data: data.iter().map(|v| v.as_f64()).collect(),
        })
        .collect();
    for (i, layer) in enc.adapters.iter().enumerate() {
        for (n, ad) in ["q", "k", "v"].iter().zip(layer.iter()) {
            for (f, m) in [("a", &ad.a), ("b", &ad.b)] {
                tensors.push(Tensor {
                    name: format!("layers.{i}.lora.{n}.{f}"),
                    shape: m.shape().to_vec(),
                    data: m.iter().map(|v| v.as_f64()).collect(),
                });
            }
        }
    }
    let file = WeightFile {
        format: FORMAT.into(),
        version: VERSION,
        config: enc.config.clone(),
        prompts: prompts.cloned(),
        base_checksum: format!("{:016x}", enc.base.checksum()),
        tensors,
    };
    let text = serde_json::to_string(&file).map_err(|e| ModelError::Format {
        path: path.into(),
        message: e.to_string(),
    })?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|source| ModelError::Io {
        path: tmp.clone(),
        source,
    })?;
    fs::rename(&tmp, path).map_err(|source| ModelError::Io {
        path: path.into(),
        source,
    })
}

struct Reader<'a> {
    path: &'a Path,
    tensors: HashMap<String, Tensor>,
}

impl Reader<'_> {
    fn err(&self, message: String) -> ModelError {
        ModelError::Format {
            path: self.path.into(),
            message,
        }
    }

    fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>, ModelError> {
        let t = self
            .tensors
            .remove(name)
            .ok_or_else(|| self.err(format!("missing tensor `{name}`")))?;
        if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
            return Err(self.err(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape)));
        }
        Ok(t.data)
    }

    fn vec<T: TensorScalar>(&mut self, name: &str, n: usize) -> Result<Array1<T>, ModelError> {
        Ok(self.take(name, &[n])?.into_iter().map(T::of).collect())
    }

    fn mat<T: TensorScalar>(&mut self, name: &str, r: usize, c: usize) -> Result<Array2<T>, ModelError> {
        let data = self.take(name, &[r, c])?.into_iter().map(T::of).collect();
        Ok(Array2::from_shape_vec((r, c), data).expect("shape checked"))
    }
}

pub fn load_weights<T: TensorScalar>(
    path: impl AsRef<Path>,
) -> Result<(VisualEncoder<T>, Option<PromptSpec>), ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.into(),
        source,
    })?;
    let file: WeightFile = serde_json::from_str(&text).map_err(|e| ModelError::Format {
        path: path.into(),
        message: e.to_string(),
    })?;
    let fail = |message: String| ModelError::Format {
        path: path.into(),
        message,
    };
    if file.format != FORMAT || file.version != VERSION {
        return Err(fail(format!("unsupported format {} v{}", file.format, file.version)));
    }
    let cfg = file.config;
    cfg.validate()?;
    let mut r = Reader {
        path,
        tensors: file.tensors.into_iter().map(|t| (t.name.clone(), t)).collect(),
    };
    let (d, m, rank) = (cfg.model_dim, cfg.mlp_dim(), cfg.lora_rank);
    let mut layers = Vec::with_capacity(cfg.num_layers);
    let mut adapters = Vec::with_capacity(cfg.num_layers);
    for i in 0..cfg.num_layers {
        let p = |n: &str| format!("layers.{i}.{n}");
        layers.push(LayerWeights {
            ln1_gamma: r.vec(&p("norm1.gamma"), d)?,
            ln1_beta: r.vec(&p("norm1.beta"), d)?,
            wq: r.mat(&p("attn.q.weight"), d, d)?,
            bq: r.vec(&p("attn.q.bias"), d)?,
            wk: r.mat(&p("attn.k.weight"), d, d)?,
            bk: r.vec(&p("attn.k.bias"), d)?,
            wv: r.mat(&p("attn.v.weight"), d, d)?,
            bv: r.vec(&p("attn.v.bias"), d)?,
            wo: r.mat(&p("attn.out.weight"), d, d)?,
            bo: r.vec(&p("attn.out.bias"), d)?,
            ln2_gamma: r.vec(&p("norm2.gamma"), d)?,
            ln2_beta: r.vec(&p("norm2.beta"), d)?,
            w1: r.mat(&p("mlp.fc1.weight"), d, m)?,
            b1: r.vec(&p("mlp.fc1.bias"), m)?,
            w2: r.mat(&p("mlp.fc2.weight"), m, d)?,
            b2: r.vec(&p("mlp.fc2.bias"), d)?,
        });
        let mut ad = |n: &str| -> Result<LoraAdapter<T>, ModelError> {
            Ok(LoraAdapter {
                a: r.mat(&p(&format!("lora.{n}.a")), d, rank)?,
                b: r.mat(&p(&format!("lora.{n}.b")), rank, d)?,
            })
        };
        adapters.push(LayerAdapters {
            q: ad("q")?,
            k: ad("k")?,
            v: ad("v")?,
        });
    }
    let base = BaseWeights {
        patch_w: r.mat("patch.weight", cfg.patch_dim(), d)?,
        patch_b: r.vec("patch.bias", d)?,
        cls: r.vec("cls", d)?,
        pos: r.mat("pos", cfg.num_tokens(), d)?,
        layers,
        lnf_gamma: r.vec("final_norm.gamma", d)?,
        lnf_beta: r.vec("final_norm.beta", d)?,
        proj: r.mat("proj", d, cfg.embed_dim)?,
    };
    if let Some(extra) = r.tensors.keys().min() {
        return Err(fail(format!("unexpected tensor `{extra}`")));
    }
    let enc = VisualEncoder {
        config: cfg,
        base,
        adapters,
    };
    enc.check_shapes()?;
    Ok((enc, file.prompts))
}
