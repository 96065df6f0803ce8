//! Frozen text side: one seeded unit vector per class prompt.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use corruptbench_core::benchgen::fnv1a64;
use corruptbench_core::rng::kernel_rng;

use crate::encoder::checksum;
use crate::error::ModelError;
use crate::TensorScalar;

pub const DEFAULT_TEMPLATE: &str = "a photo of a {class}, a {modality} image";

/// Settings that regenerate a [`PromptTable`] for any class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub template: String,
    pub modality: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTable<T> {
    pub spec: PromptSpec,
    pub class_names: Vec<String>,
    pub prompts: Vec<String>,
    vectors: Array2<T>,
}

impl<T: TensorScalar> PromptTable<T> {
    /// Class vectors as rows.
    pub fn vectors(&self) -> &Array2<T> {
        &self.vectors
    }

    pub fn vector(&self, class: usize) -> ArrayView1<'_, T> {
        self.vectors.row(class)
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn checksum(&self) -> u64 {
        checksum(vec![(
            self.prompts.join("\n"),
            self.vectors.shape().to_vec(),
            self.vectors.iter().copied().collect(),
        )])
    }
}

pub fn render_prompt(template: &str, class: &str, modality: &str) -> String {
    template.replace("{class}", class).replace("{modality}", modality)
}

/// Builds the table; each vector depends only on `seed` and its full prompt string.
pub fn prompt_embeddings<T: TensorScalar, S: AsRef<str>>(
    class_names: &[S],
    modality: &str,
    template: &str,
    seed: u64,
    dim: usize,
) -> Result<PromptTable<T>, ModelError> {
    if class_names.is_empty() {
        return Err(ModelError::NoClasses);
    }
    if dim == 0 {
        return Err(ModelError::InvalidConfig("embedding dimension must be positive".into()));
    }
    let mut seen = HashSet::new();
    let mut prompts = Vec::with_capacity(class_names.len());
    for name in class_names {
        let name = name.as_ref();
        if !seen.insert(name) {
            return Err(ModelError::DuplicateClass(name.to_string()));
        }
        prompts.push(render_prompt(template, name, modality));
    }
    if prompts.iter().collect::<HashSet<_>>().len() != prompts.len() {
        return Err(ModelError::InvalidConfig(format!(
            "template `{template}` maps different classes to the same prompt"
        )));
    }
    let mut vectors = Array2::zeros((prompts.len(), dim));
    for (mut row, prompt) in vectors.rows_mut().into_iter().zip(&prompts) {
        let mut rng = kernel_rng(fnv1a64(format!("{seed}|{prompt}").as_bytes()));
        let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (dst, v) in row.iter_mut().zip(raw) {
            *dst = T::of(v / norm);
        }
    }
    Ok(PromptTable {
        spec: PromptSpec {
            template: template.to_string(),
            modality: modality.to_string(),
            seed,
        },
        class_names: class_names.iter().map(|s| s.as_ref().to_string()).collect(),
        prompts,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLASSES: [&str; 8] = [
        "basophil",
        "eosinophil",
        "erythroblast",
        "ig",
        "lymphocyte",
        "monocyte",
        "neutrophil",
        "platelet",
    ];

    #[test]
    fn deterministic_unit_and_distinct() {
        let a: PromptTable<f64> = prompt_embeddings(&CLASSES, "cell microscopy", DEFAULT_TEMPLATE, 7, 32).unwrap();
        let b: PromptTable<f64> = prompt_embeddings(&CLASSES, "cell microscopy", DEFAULT_TEMPLATE, 7, 32).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.prompts[0], "a photo of a basophil, a cell microscopy image");
        for i in 0..a.len() {
            assert!((a.vector(i).dot(&a.vector(i)).sqrt() - 1.0).abs() < 1e-6);
            for j in 0..i {
                assert!(a.vector(i).dot(&a.vector(j)) < 0.999);
            }
        }
        let c: PromptTable<f64> = prompt_embeddings(&CLASSES, "cell microscopy", DEFAULT_TEMPLATE, 8, 32).unwrap();
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn keyed_by_prompt_not_position() {
        let a: PromptTable<f64> = prompt_embeddings(&["x", "y"], "m", DEFAULT_TEMPLATE, 1, 16).unwrap();
        let b: PromptTable<f64> = prompt_embeddings(&["y", "x"], "m", DEFAULT_TEMPLATE, 1, 16).unwrap();
        assert_eq!(a.vector(0), b.vector(1));
    }

    #[test]
    fn rejects_bad_class_lists() {
        assert!(matches!(
            prompt_embeddings::<f64, &str>(&["a", "a"], "m", DEFAULT_TEMPLATE, 0, 4),
            Err(ModelError::DuplicateClass(_))
        ));
        assert!(matches!(
            prompt_embeddings::<f64, &str>(&[], "m", DEFAULT_TEMPLATE, 0, 4),
            Err(ModelError::NoClasses)
        ));
        assert!(prompt_embeddings::<f64, &str>(&["a", "b"], "m", "fixed text", 0, 4).is_err());
    }
}
