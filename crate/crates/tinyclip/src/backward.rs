use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use corruptbench_core::datamodel::ImageBuffer;

use crate::encoder::{LayerWeights, VisualEncoder};
use crate::error::ModelError;
use crate::forward::{forward, gelu_grad, LayerCache};
use crate::loss::{row_loss, softmax};
use crate::prompts::PromptTable;
use crate::TensorScalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGradient<T> {
    pub a: Array2<T>,
    pub b: Array2<T>,
}

/// Batch loss and its gradient with respect to every adapter factor,
/// ordered per layer as Q, K, V.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraGradients<T> {
    pub loss: T,
    pub layers: Vec<[AdapterGradient<T>; 3]>,
}

pub(crate) fn ln_backward<T: TensorScalar>(
    dy: ArrayView2<T>,
    gamma: &Array1<T>,
    xhat: &Array2<T>,
    inv: &Array1<T>,
) -> Array2<T> {
    let d = T::of(dy.ncols() as f64);
    let mut dx = &dy * gamma;
    for ((mut row, xh), &r) in dx.rows_mut().into_iter().zip(xhat.rows()).zip(inv) {
        let mean_a = row.sum() / d;
        let mean_b = row.iter().zip(xh).map(|(&g, &x)| g * x).sum::<T>() / d;
        for (g, &x) in row.iter_mut().zip(xh) {
            *g = r * (*g - mean_a - x * mean_b);
        }
    }
    dx
}

/// Backpropagates `dout` (gradient of the block's `m` output rows).
/// Returns the input gradient when requested and `dL/dW` for the merged Q/K/V.
fn block_backward<T: TensorScalar>(
    lw: &LayerWeights<T>,
    qkv: &[Array2<T>; 3],
    heads: usize,
    c: &LayerCache<T>,
    dout: &Array2<T>,
    need_dx: bool,
) -> (Option<Array2<T>>, [Array2<T>; 3]) {
    let m = dout.nrows();
    let (n, d) = c.h.dim();
    let dh_ = d / heads;
    let scale = T::one() / T::of(dh_ as f64).sqrt();

    let dact = dout.dot(&lw.w2.t());
    let dpre = dact * &c.pre.mapv(gelu_grad);
    let dh2 = dpre.dot(&lw.w1.t());
    let dmid = dout + &ln_backward(dh2.view(), &lw.ln2_gamma, &c.xhat2, &c.inv2);

    let dattn = dmid.dot(&lw.wo.t());
    let mut dq = Array2::zeros((m, d));
    let mut dk = Array2::zeros((n, d));
    let mut dv = Array2::zeros((n, d));
    for (hd, p) in c.probs.iter().enumerate() {
        let cols = s![.., hd * dh_..(hd + 1) * dh_];
        let d_o = dattn.slice(cols);
        dv.slice_mut(cols).assign(&p.t().dot(&d_o));
        let dp = d_o.dot(&c.v.slice(cols).t());
        let row_dot = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = (&dp - &row_dot) * p * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    let hq = c.h.slice(s![..m, ..]);
    let dw = [hq.t().dot(&dq), c.h.t().dot(&dk), c.h.t().dot(&dv)];

    let dx = need_dx.then(|| {
        let mut dh = dk.dot(&qkv[1].t()) + dv.dot(&qkv[2].t());
        {
            let mut top = dh.slice_mut(s![..m, ..]);
            top += &dq.dot(&qkv[0].t());
        }
        let mut dx = ln_backward(dh.view(), &lw.ln1_gamma, &c.xhat1, &c.inv1);
        {
            let mut top = dx.slice_mut(s![..m, ..]);
            top += &dmid;
        }
        dx
    });
    (dx, dw)
}

type MergedGrads<T> = Vec<[Array2<T>; 3]>;

fn sample_gradient<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    qkv: &[[Array2<T>; 3]],
    img: &ImageBuffer<T>,
    label: usize,
    table: &PromptTable<T>,
    tau: T,
    weight: T,
) -> Result<(T, MergedGrads<T>), ModelError> {
    let (f, cache) = forward(enc, qkv, img, true)?;
    let cache = cache.expect("cache requested");
    let scores = table.vectors().dot(&f);
    let loss = row_loss(scores.view(), label, tau);

    let mut ds = softmax(scores.mapv(|s| s / tau).view());
    ds[label] -= T::one();
    ds.mapv_inplace(|v| v * weight / tau);
    let df = table.vectors().t().dot(&ds);
    let dz = (&df - &(&cache.f * f.dot(&df))) / cache.znorm;
    let du = enc.base.proj.dot(&dz).insert_axis(Axis(0));
    let mut dout = ln_backward(du.view(), &enc.base.lnf_gamma, &cache.xhatf, &cache.invf);

    let layers = enc.config.num_layers;
    let mut grads: Vec<Option<[Array2<T>; 3]>> = vec![None; layers];
    for l in (0..layers).rev() {
        let (dx, dw) = block_backward(
            &enc.base.layers[l],
            &qkv[l],
            enc.config.num_heads,
            &cache.layers[l],
            &dout,
            l > 0,
        );
        grads[l] = Some(dw);
        if let Some(dx) = dx {
            dout = dx;
        }
    }
    Ok((
        loss,
        grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
    ))
}

/// Exact gradients of the mean batch loss with respect to all adapter
/// factors. Base weights and prompts receive no gradient.
///
/// Samples are processed in parallel; their contributions are summed in
/// batch order so the result does not depend on the thread count.
pub fn loss_gradients<T: TensorScalar>(
    enc: &VisualEncoder<T>,
    batch: &[(&ImageBuffer<T>, usize)],
    table: &PromptTable<T>,
    tau: T,
) -> Result<LoraGradients<T>, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::DimensionMismatch { expected: 1, got: 0 });
    }
    if !(tau > T::zero()) {
        return Err(ModelError::InvalidConfig("temperature must be positive".into()));
    }
    if table.dim() != enc.config.embed_dim {
        return Err(ModelError::DimensionMismatch {
            expected: enc.config.embed_dim,
            got: table.dim(),
        });
    }
    for &(_, y) in batch {
        if y >= table.len() {
            return Err(ModelError::InvalidLabel {
                label: y,
                classes: table.len(),
            });
        }
    }
    let qkv = enc.merged_qkv();
    let weight = T::one() / T::of(batch.len() as f64);
    let parts: Vec<(T, MergedGrads<T>)> = batch
        .par_iter()
        .map(|&(img, y)| sample_gradient(enc, &qkv, img, y, table, tau, weight))
        .collect::<Result<_, _>>()?;

    let mut loss = T::zero();
    let mut total: Option<MergedGrads<T>> = None;
    for (i, (l, g)) in parts.into_iter().enumerate() {
        loss += (l - loss) / T::of((i + 1) as f64);
        match total.as_mut() {
            None => total = Some(g),
            Some(t) => {
                for (acc, part) in t.iter_mut().zip(g) {
                    for (a, p) in acc.iter_mut().zip(part) {
                        *a += &p;
                    }
                }
            }
        }
    }
    let total = total.expect("non-empty batch");
    let layers = total
        .into_iter()
        .zip(&enc.adapters)
        .map(|(dw, ad)| {
            let mut it = dw.into_iter().zip(ad.iter()).map(|(w, a)| AdapterGradient {
                a: w.dot(&a.b.t()),
                b: a.a.t().dot(&w),
            });
            [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
        })
        .collect();
    Ok(LoraGradients { loss, layers })
}
