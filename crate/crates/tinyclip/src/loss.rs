//! Cosine scores and the temperature-scaled cross-entropy over them.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::ModelError;
use crate::prompts::PromptTable;
use crate::TensorScalar;

/// Cosine similarity between `f_v` and every class vector.
pub fn similarity<T: TensorScalar>(f_v: &Array1<T>, table: &PromptTable<T>) -> Result<Array1<T>, ModelError> {
    let dots = similarity_unit(f_v, table)?;
    let nf = f_v.dot(f_v).sqrt();
    let norms = table.vectors().rows().into_iter().map(|t| t.dot(&t).sqrt());
    Ok(dots
        .iter()
        .zip(norms)
        .map(|(&s, nt)| {
            let den = nf * nt;
            if den > T::zero() {
                (s / den).max(-T::one()).min(T::one())
            } else {
                T::zero()
            }
        })
        .collect())
}

/// Plain dot products; equal to [`similarity`] when `f_v` is unit-norm.
pub(crate) fn similarity_unit<T: TensorScalar>(
    f_v: &Array1<T>,
    table: &PromptTable<T>,
) -> Result<Array1<T>, ModelError> {
    if f_v.len() != table.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: table.dim(),
            got: f_v.len(),
        });
    }
    Ok(table.vectors().dot(f_v))
}

pub fn softmax<T: TensorScalar>(logits: ArrayView1<T>) -> Array1<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

/// `-log softmax(S/τ)[y]` for one score row, computed as a shifted log-sum-exp.
pub(crate) fn row_loss<T: TensorScalar>(scores: ArrayView1<T>, label: usize, tau: T) -> T {
    let logits = scores.mapv(|s| s / tau);
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    lse - (logits[label] - max)
}

/// Mean cross-entropy of `softmax(scores / τ)` against `labels`.
pub fn finetune_loss<T: TensorScalar>(scores: &Array2<T>, labels: &[usize], tau: T) -> Result<T, ModelError> {
    if !(tau > T::zero()) {
        return Err(ModelError::InvalidConfig("temperature must be positive".into()));
    }
    if labels.len() != scores.nrows() || labels.is_empty() {
        return Err(ModelError::DimensionMismatch {
            expected: scores.nrows(),
            got: labels.len(),
        });
    }
    let classes = scores.ncols();
    // running mean: identical rows average to exactly their common value
    let mut mean = T::zero();
    for (i, (row, &y)) in scores.rows().into_iter().zip(labels).enumerate() {
        if y >= classes {
            return Err(ModelError::InvalidLabel { label: y, classes });
        }
        mean += (row_loss(row, y, tau) - mean) / T::of((i + 1) as f64);
    }
    Ok(mean)
}
