use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use corruptbench_core::benchgen::fnv1a64;
use corruptbench_core::rng::{kernel_rng, mix_seed, KernelRng};

use crate::config::EncoderConfig;
use crate::error::ModelError;
use crate::TensorScalar;

/// Standard deviation of the adapter `A` factor at initialisation.
pub const ADAPTER_INIT_STD: f64 = 0.02;
/// Standard deviation of class token and positional embeddings.
const TOKEN_INIT_STD: f64 = 1.0;
/// Patch embedding std as a multiple of `1/sqrt(patch_dim)`.
const PATCH_INIT_GAIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub ln1_gamma: Array1<T>,
    pub ln1_beta: Array1<T>,
    pub wq: Array2<T>,
    pub bq: Array1<T>,
    pub wk: Array2<T>,
    pub bk: Array1<T>,
    pub wv: Array2<T>,
    pub bv: Array1<T>,
    pub wo: Array2<T>,
    pub bo: Array1<T>,
    pub ln2_gamma: Array1<T>,
    pub ln2_beta: Array1<T>,
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

/// Frozen weights. Row-vector convention throughout: `y = x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseWeights<T> {
    pub patch_w: Array2<T>,
    pub patch_b: Array1<T>,
    pub cls: Array1<T>,
    pub pos: Array2<T>,
    pub layers: Vec<LayerWeights<T>>,
    pub lnf_gamma: Array1<T>,
    pub lnf_beta: Array1<T>,
    pub proj: Array2<T>,
}

/// Additive low-rank update `A·B` (`A`: d×r, `B`: r×d).
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter<T> {
    pub a: Array2<T>,
    pub b: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerAdapters<T> {
    pub q: LoraAdapter<T>,
    pub k: LoraAdapter<T>,
    pub v: LoraAdapter<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualEncoder<T> {
    pub config: EncoderConfig,
    pub base: BaseWeights<T>,
    pub adapters: Vec<LayerAdapters<T>>,
}

fn gaussian<T: TensorScalar>(rng: &mut KernelRng, shape: (usize, usize), std: f64) -> Array2<T> {
    Array2::from_shape_simple_fn(shape, || T::of(std * rng.sample::<f64, _>(StandardNormal)))
}

fn constant<T: TensorScalar>(n: usize, v: f64) -> Array1<T> {
    Array1::from_elem(n, T::of(v))
}

fn fan_in<T: TensorScalar>(rng: &mut KernelRng, rows: usize, cols: usize) -> Array2<T> {
    gaussian(rng, (rows, cols), 1.0 / (rows as f64).sqrt())
}

impl<T: TensorScalar> BaseWeights<T> {
    /// Seeded stand-in for pretrained weights: fan-in scaled Gaussian
    /// matrices, unit-scale token embeddings, unit norms and zero biases.
    pub fn seeded(cfg: &EncoderConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let d = cfg.model_dim;
        let m = cfg.mlp_dim();
        let mut rng = kernel_rng(mix_seed(seed, 0x4241_5345));
        let patch_w = gaussian(
            &mut rng,
            (cfg.patch_dim(), d),
            PATCH_INIT_GAIN / (cfg.patch_dim() as f64).sqrt(),
        );
        let cls = gaussian(&mut rng, (1, d), TOKEN_INIT_STD)
            .into_shape_with_order(d)
            .expect("1×d");
        let pos = gaussian(&mut rng, (cfg.num_tokens(), d), TOKEN_INIT_STD);
        let layers = (0..cfg.num_layers)
            .map(|_| LayerWeights {
                ln1_gamma: constant(d, 1.0),
                ln1_beta: constant(d, 0.0),
                wq: fan_in(&mut rng, d, d),
                bq: constant(d, 0.0),
                wk: fan_in(&mut rng, d, d),
                bk: constant(d, 0.0),
                wv: fan_in(&mut rng, d, d),
                bv: constant(d, 0.0),
                wo: fan_in(&mut rng, d, d),
                bo: constant(d, 0.0),
                ln2_gamma: constant(d, 1.0),
                ln2_beta: constant(d, 0.0),
                w1: fan_in(&mut rng, d, m),
                b1: constant(m, 0.0),
                w2: fan_in(&mut rng, m, d),
                b2: constant(d, 0.0),
            })
            .collect();
        Ok(Self {
            patch_w,
            patch_b: constant(d, 0.0),
            cls,
            pos,
            layers,
            lnf_gamma: constant(d, 1.0),
            lnf_beta: constant(d, 0.0),
            proj: fan_in(&mut rng, d, cfg.embed_dim),
        })
    }

    /// Every tensor in a fixed order with a stable name.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<T>)> {
        let mut out = Vec::new();
        let mut push1 = |name: String, a: &Array1<T>| out.push((name, vec![a.len()], a.to_vec()));
        push1("patch.bias".into(), &self.patch_b);
        push1("cls".into(), &self.cls);
        push1("final_norm.gamma".into(), &self.lnf_gamma);
        push1("final_norm.beta".into(), &self.lnf_beta);
        for (i, l) in self.layers.iter().enumerate() {
            for (n, a) in [
                ("norm1.gamma", &l.ln1_gamma),
                ("norm1.beta", &l.ln1_beta),
                ("attn.q.bias", &l.bq),
                ("attn.k.bias", &l.bk),
                ("attn.v.bias", &l.bv),
                ("attn.out.bias", &l.bo),
                ("norm2.gamma", &l.ln2_gamma),
                ("norm2.beta", &l.ln2_beta),
                ("mlp.fc1.bias", &l.b1),
                ("mlp.fc2.bias", &l.b2),
            ] {
                push1(format!("layers.{i}.{n}"), a);
            }
        }
        let mut push2 = |name: String, a: &Array2<T>| out.push((name, a.shape().to_vec(), a.iter().copied().collect()));
        push2("patch.weight".into(), &self.patch_w);
        push2("pos".into(), &self.pos);
        push2("proj".into(), &self.proj);
        for (i, l) in self.layers.iter().enumerate() {
            for (n, a) in [
                ("attn.q.weight", &l.wq),
                ("attn.k.weight", &l.wk),
                ("attn.v.weight", &l.wv),
                ("attn.out.weight", &l.wo),
                ("mlp.fc1.weight", &l.w1),
                ("mlp.fc2.weight", &l.w2),
            ] {
                push2(format!("layers.{i}.{n}"), a);
            }
        }
        out
    }

    /// FNV-1a over names and the bit patterns of every value.
    pub fn checksum(&self) -> u64 {
        checksum(self.named_tensors())
    }
}

pub(crate) fn checksum<T: TensorScalar>(tensors: Vec<(String, Vec<usize>, Vec<T>)>) -> u64 {
    let mut bytes = Vec::new();
    for (name, shape, values) in tensors {
        bytes.extend_from_slice(name.as_bytes());
        for s in shape {
            bytes.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for v in values {
            bytes.extend_from_slice(&v.as_f64().to_bits().to_le_bytes());
        }
    }
    fnv1a64(&bytes)
}

impl<T: TensorScalar> LoraAdapter<T> {
    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// `W + A·B`, or a copy of `W` for rank 0.
    pub fn merge(&self, w: &Array2<T>) -> Array2<T> {
        if self.rank() == 0 {
            w.clone()
        } else {
            w + &self.a.dot(&self.b)
        }
    }
}

impl<T: TensorScalar> LayerAdapters<T> {
    /// `A ~ N(0, 0.02²)`, `B = 0`.
    pub fn init(cfg: &EncoderConfig, rng: &mut KernelRng) -> Self {
        let (d, r) = (cfg.model_dim, cfg.lora_rank);
        let mut one = || LoraAdapter {
            a: gaussian(rng, (d, r), ADAPTER_INIT_STD),
            b: Array2::zeros((r, d)),
        };
        Self {
            q: one(),
            k: one(),
            v: one(),
        }
    }

    pub fn iter(&self) -> [&LoraAdapter<T>; 3] {
        [&self.q, &self.k, &self.v]
    }

    pub fn iter_mut(&mut self) -> [&mut LoraAdapter<T>; 3] {
        [&mut self.q, &mut self.k, &mut self.v]
    }
}

impl<T: TensorScalar> VisualEncoder<T> {
    /// Seeded base weights plus freshly initialised adapters.
    pub fn seeded(cfg: &EncoderConfig, base_seed: u64, adapter_seed: u64) -> Result<Self, ModelError> {
        let base = BaseWeights::seeded(cfg, base_seed)?;
        Self::with_base(cfg, base, adapter_seed)
    }

    pub fn with_base(cfg: &EncoderConfig, base: BaseWeights<T>, adapter_seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut enc = Self {
            config: cfg.clone(),
            base,
            adapters: Vec::new(),
        };
        enc.check_shapes()?;
        enc.reset_adapters(adapter_seed);
        Ok(enc)
    }

    pub fn reset_adapters(&mut self, seed: u64) {
        let mut rng = kernel_rng(mix_seed(seed, 0x4c4f_5241));
        self.adapters = (0..self.config.num_layers)
            .map(|_| LayerAdapters::init(&self.config, &mut rng))
            .collect();
    }

    /// The same encoder with rank-0 adapters, i.e. the frozen base alone.
    pub fn adapter_free(&self) -> Self {
        let d = self.config.model_dim;
        let empty = || LoraAdapter {
            a: Array2::zeros((d, 0)),
            b: Array2::zeros((0, d)),
        };
        let mut config = self.config.clone();
        config.lora_rank = 0;
        Self {
            config,
            base: self.base.clone(),
            adapters: (0..self.config.num_layers)
                .map(|_| LayerAdapters {
                    q: empty(),
                    k: empty(),
                    v: empty(),
                })
                .collect(),
        }
    }

    pub fn lora_parameter_count(&self) -> usize {
        self.adapters
            .iter()
            .flat_map(|l| l.iter())
            .map(|a| a.a.len() + a.b.len())
            .sum()
    }

    /// Per layer, the effective Q/K/V projections `W + A·B`.
    pub(crate) fn merged_qkv(&self) -> Vec<[Array2<T>; 3]> {
        self.base
            .layers
            .iter()
            .zip(&self.adapters)
            .map(|(l, a)| [a.q.merge(&l.wq), a.k.merge(&l.wk), a.v.merge(&l.wv)])
            .collect()
    }

    /// Validates every tensor shape against the config.
    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let cfg = &self.config;
        let (d, m, r) = (cfg.model_dim, cfg.mlp_dim(), cfg.lora_rank);
        let b = &self.base;
        let bad = |what: &str| {
            Err(ModelError::InvalidConfig(format!(
                "tensor `{what}` has the wrong shape"
            )))
        };
        let eq2 = |a: &Array2<T>, s: (usize, usize)| a.dim() == s;
        if !eq2(&b.patch_w, (cfg.patch_dim(), d)) || b.patch_b.len() != d {
            return bad("patch");
        }
        if b.cls.len() != d || !eq2(&b.pos, (cfg.num_tokens(), d)) {
            return bad("cls/pos");
        }
        if b.lnf_gamma.len() != d || b.lnf_beta.len() != d || !eq2(&b.proj, (d, cfg.embed_dim)) {
            return bad("head");
        }
        if b.layers.len() != cfg.num_layers {
            return bad("layers");
        }
        for l in &b.layers {
            let vecs_d = [
                &l.ln1_gamma,
                &l.ln1_beta,
                &l.bq,
                &l.bk,
                &l.bv,
                &l.bo,
                &l.ln2_gamma,
                &l.ln2_beta,
                &l.b2,
            ];
            if vecs_d.iter().any(|v| v.len() != d) || l.b1.len() != m {
                return bad("layer vector");
            }
            if [&l.wq, &l.wk, &l.wv, &l.wo].iter().any(|w| !eq2(w, (d, d)))
                || !eq2(&l.w1, (d, m))
                || !eq2(&l.w2, (m, d))
            {
                return bad("layer matrix");
            }
        }
        if !self.adapters.is_empty() {
            if self.adapters.len() != cfg.num_layers {
                return bad("adapters");
            }
            for a in self.adapters.iter().flat_map(|l| l.iter()) {
                if !eq2(&a.a, (d, r)) || !eq2(&a.b, (r, d)) {
                    return bad("adapter");
                }
            }
        }
        Ok(())
    }

    pub fn adapter_checksum(&self) -> u64 {
        let mut tensors = Vec::new();
        for (i, l) in self.adapters.iter().enumerate() {
            for (n, a) in ["q", "k", "v"].iter().zip(l.iter()) {
                tensors.push((
                    format!("{i}.{n}.a"),
                    a.a.shape().to_vec(),
                    a.a.iter().copied().collect(),
                ));
                tensors.push((
                    format!("{i}.{n}.b"),
                    a.b.shape().to_vec(),
                    a.b.iter().copied().collect(),
                ));
            }
        }
        checksum(tensors)
    }

    /// Converts the element type of every tensor.
    pub fn cast<U: TensorScalar>(&self) -> VisualEncoder<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| U::of(v.as_f64()));
        let c2 = |a: &Array2<T>| a.mapv(|v| U::of(v.as_f64()));
        let b = &self.base;
        VisualEncoder {
            config: self.config.clone(),
            base: BaseWeights {
                patch_w: c2(&b.patch_w),
                patch_b: c1(&b.patch_b),
                cls: c1(&b.cls),
                pos: c2(&b.pos),
                layers: b
                    .layers
                    .iter()
                    .map(|l| LayerWeights {
                        ln1_gamma: c1(&l.ln1_gamma),
                        ln1_beta: c1(&l.ln1_beta),
                        wq: c2(&l.wq),
                        bq: c1(&l.bq),
                        wk: c2(&l.wk),
                        bk: c1(&l.bk),
                        wv: c2(&l.wv),
                        bv: c1(&l.bv),
                        wo: c2(&l.wo),
                        bo: c1(&l.bo),
                        ln2_gamma: c1(&l.ln2_gamma),
                        ln2_beta: c1(&l.ln2_beta),
                        w1: c2(&l.w1),
                        b1: c1(&l.b1),
                        w2: c2(&l.w2),
                        b2: c1(&l.b2),
                    })
                    .collect(),
                lnf_gamma: c1(&b.lnf_gamma),
                lnf_beta: c1(&b.lnf_beta),
                proj: c2(&b.proj),
            },
            adapters: self
                .adapters
                .iter()
                .map(|l| {
                    let c = |a: &LoraAdapter<T>| LoraAdapter {
                        a: c2(&a.a),
                        b: c2(&a.b),
                    };
                    LayerAdapters {
                        q: c(&l.q),
                        k: c(&l.k),
                        v: c(&l.v),
                    }
                })
                .collect(),
        }
    }
}
