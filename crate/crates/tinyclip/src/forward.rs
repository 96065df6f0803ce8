use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use corruptbench_core::datamodel::ImageBuffer;

use crate::encoder::{LayerWeights, VisualEncoder};
use crate::error::ModelError;
use crate::loss::similarity_unit;
use crate::prompts::PromptTable;
use crate::TensorScalar;

pub(crate) const LN_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

pub(crate) fn gelu<T: TensorScalar>(x: T) -> T {
    let k = T::of(GELU_K);
    let half = T::of(0.5);
    half * x * (T::one() + (k * (x + T::of(GELU_C) * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<T: TensorScalar>(x: T) -> T {
    let k = T::of(GELU_K);
    let c = T::of(GELU_C);
    let half = T::of(0.5);
    let t = (k * (x + c * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * k * (T::one() + T::of(3.0) * c * x * x)
}

/// Row-wise layer norm. Returns the output, the normalised input and `1/σ` per row.
pub(crate) fn layer_norm<T: TensorScalar>(
    x: ArrayView2<T>,
    gamma: &Array1<T>,
    beta: &Array1<T>,
) -> (Array2<T>, Array2<T>, Array1<T>) {
    let d = T::of(x.ncols() as f64);
    let eps = T::of(LN_EPS);
    let mut xhat = x.to_owned();
    let mut inv = Array1::zeros(x.nrows());
    for (mut row, inv_r) in xhat.rows_mut().into_iter().zip(inv.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<T>() / d;
        let r = T::one() / (var + eps).sqrt();
        row.mapv_inplace(|v| v * r);
        *inv_r = r;
    }
    let y = &xhat * gamma + beta;
    (y, xhat, inv)
}

pub(crate) fn softmax_rows<T: TensorScalar>(s: &mut Array2<T>) {
    for mut row in s.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Splits an image into flattened patches, row-major over the patch grid,
/// each patch laid out as (dy, dx, channel).
pub fn patchify<T: TensorScalar>(cfg: &crate::EncoderConfig, img: &ImageBuffer<T>) -> Result<Array2<T>, ModelError> {
    let expected = (cfg.image_size, cfg.image_size, cfg.channels);
    if img.shape() != expected {
        return Err(ModelError::ImageShape {
            expected,
            got: img.shape(),
        });
    }
    let (p, c, g) = (cfg.patch_size, cfg.channels, cfg.grid());
    let px = img.pixels();
    let mut out = Array2::zeros((cfg.num_patches(), cfg.patch_dim()));
    for gy in 0..g {
        for gx in 0..g {
            let mut row = out.row_mut(gy * g + gx);
            let mut k = 0;
            for dy in 0..p {
                let start = img.index(gy * p + dy, gx * p, 0);
                for &v in &px[start..start + p * c] {
                    row[k] = v;
                    k += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Intermediate values of one transformer block, kept for backpropagation.
pub(crate) struct LayerCache<T> {
    pub xhat1: Array2<T>,
    pub inv1: Array1<T>,
    pub h: Array2<T>,
    pub q: Array2<T>,
    pub k: Array2<T>,
    pub v: Array2<T>,
    pub probs: Vec<Array2<T>>,
    pub xhat2: Array2<T>,
    pub inv2: Array1<T>,
    pub pre: Array2<T>,
}

/// One pre-norm block over `n` tokens, producing only the first `m` rows.
///
/// Keys and values see every token; queries, residuals and the MLP are
/// restricted to the first `m`. The last block runs with `m = 1`.
pub(crate) fn block_forward<T: TensorScalar>(
    lw: &LayerWeights<T>,
    qkv: &[Array2<T>; 3],
    heads: usize,
    x: &Array2<T>,
    m: usize,
    keep: bool,
) -> (Array2<T>, Option<LayerCache<T>>) {
    let d = x.ncols();
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (h, xhat1, inv1) = layer_norm(x.view(), &lw.ln1_gamma, &lw.ln1_beta);
    let hq = h.slice(s![..m, ..]);
    let q = hq.dot(&qkv[0]) + &lw.bq;
    let k = h.dot(&qkv[1]) + &lw.bk;
    let v = h.dot(&qkv[2]) + &lw.bv;

    let mut attn = Array2::zeros((m, d));
    let mut probs = Vec::with_capacity(if keep { heads } else { 0 });
    for hd in 0..heads {
        let cols = s![.., hd * dh..(hd + 1) * dh];
        let mut sc = q.slice(cols).dot(&k.slice(cols).t());
        sc.mapv_inplace(|v| v * scale);
        softmax_rows(&mut sc);
        attn.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
        if keep {
            probs.push(sc);
        }
    }
    let mut mid = x.slice(s![..m, ..]).to_owned();
    mid += &(attn.dot(&lw.wo) + &lw.bo);
    let (h2, xhat2, inv2) = layer_norm(mid.view(), &lw.ln2_gamma, &lw.ln2_beta);
    let pre = h2.dot(&lw.w1) + &lw.b1;
    let act = pre.mapv(gelu);
    let out = mid + &(act.dot(&lw.w2) + &lw.b2);
    let cache = keep.then(|| LayerCache {
        xhat1,
        inv1,
        h,
        q,
        k,
        v,
        probs,
        xhat2,
        inv2,
        pre,
    });
    (out, cache)
}

pub(crate) struct ForwardCache<T> {
    pub layers: Vec<LayerCache<T>>,
    pub xhatf: Array2<T>,
    pub invf: Array1<T>,
    pub znorm: T,
    pub f: Array1<T>,
}

/// Token matrix: class token then patch embeddings, plus positions.
pub(crate) fn embed<T: TensorScalar>(enc: &VisualEncoder<T>, img: &ImageBuffer<T>) -> Result<Array2<T>, ModelError> {
    let b = &enc.base;
    let patches = patchify(&enc.config, img)?.dot(&b.patch_w) + &b.patch_b;
    let mut x = Array2::zeros((enc.config.num_tokens(), enc.config.model_dim));
    x.row_mut(0).assign(&b.cls);
    x.slice_mut(s![1.., ..]).assign(&patches);
    x += &b.pos;
    Ok(x)
}

pub(crate) fn forward<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    qkv: &[[Array2<T>; 3]],
    img: &ImageBuffer<T>,
    keep: bool,
) -> Result<(Array1<T>, Option<ForwardCache<T>>), ModelError> {
    let mut x = embed(enc, img)?;
    let n = x.nrows();
    let last = enc.config.num_layers - 1;
    let mut layers = Vec::new();
    for (i, (lw, w)) in enc.base.layers.iter().zip(qkv).enumerate() {
        let m = if i == last { 1 } else { n };
        let (out, cache) = block_forward(lw, w, enc.config.num_heads, &x, m, keep);
        layers.extend(cache);
        x = out;
    }
    let b = &enc.base;
    let (u, xhatf, invf) = layer_norm(x.view(), &b.lnf_gamma, &b.lnf_beta);
    let z = u.row(0).dot(&b.proj);
    let znorm = z.dot(&z).sqrt();
    let f = z.mapv(|v| v / znorm);
    let cache = keep.then(|| ForwardCache {
        layers,
        xhatf,
        invf,
        znorm,
        f: f.clone(),
    });
    Ok((f, cache))
}

/// Unit-norm image embedding.
pub fn encode_image<T: TensorScalar>(enc: &VisualEncoder<T>, img: &ImageBuffer<T>) -> Result<Array1<T>, ModelError> {
    let qkv = enc.merged_qkv();
    forward(enc, &qkv, img, false).map(|(f, _)| f)
}

/// Embeds many images in parallel; results keep input order.
pub fn encode_batch<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    imgs: &[ImageBuffer<T>],
) -> Result<Vec<Array1<T>>, ModelError> {
    let qkv = enc.merged_qkv();
    imgs.par_iter()
        .map(|img| forward(enc, &qkv, img, false).map(|(f, _)| f))
        .collect()
}

pub(crate) fn argmax<T: TensorScalar>(scores: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Class with the highest cosine similarity; ties go to the lowest label.
pub fn zero_shot_predict<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    img: &ImageBuffer<T>,
    table: &PromptTable<T>,
) -> Result<usize, ModelError> {
    let f = encode_image(enc, img)?;
    Ok(argmax(similarity_unit(&f, table)?.view()))
}

pub fn predict_batch<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    imgs: &[ImageBuffer<T>],
    table: &PromptTable<T>,
) -> Result<Vec<usize>, ModelError> {
    let feats = encode_batch(enc, imgs)?;
    if feats.is_empty() {
        return Ok(Vec::new());
    }
    let mut f = Array2::zeros((feats.len(), feats[0].len()));
    for (mut row, v) in f.axis_iter_mut(Axis(0)).zip(&feats) {
        row.assign(v);
    }
    if f.ncols() != table.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: table.dim(),
            got: f.ncols(),
        });
    }
    let scores = f.dot(&table.vectors().t());
    Ok(scores.rows().into_iter().map(argmax).collect())
}
