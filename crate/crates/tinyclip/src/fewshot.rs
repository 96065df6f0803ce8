//! Stratified few-shot subsets of a training split.

use rand::seq::SliceRandom;

use corruptbench_core::datamodel::{DatasetManifest, ManifestItem};
use corruptbench_core::rng::{kernel_rng, mix_seed};

use crate::error::ModelError;

/// Items kept from a class of `n`: `max(1, round(p·n/100))`.
pub fn per_class_count(n: usize, percent: f64) -> usize {
    ((percent * n as f64 / 100.0).round() as usize).clamp(1, n)
}

/// Sorted indices of a stratified sample: per class, a seeded shuffle
/// followed by taking [`per_class_count`] items.
pub fn few_shot_indices(
    labels: &[usize],
    num_classes: usize,
    percent: f64,
    seed: u64,
) -> Result<Vec<usize>, ModelError> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(ModelError::InvalidPercent(percent));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class
            .get_mut(y)
            .ok_or(ModelError::InvalidLabel {
                label: y,
                classes: num_classes,
            })?
            .push(i);
    }
    let mut out = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            return Err(ModelError::EmptyClass(class));
        }
        let keep = per_class_count(members.len(), percent);
        members.shuffle(&mut kernel_rng(mix_seed(seed, class as u64)));
        out.extend_from_slice(&members[..keep]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Manifest-order subset of `manifest.items`.
pub fn few_shot_sample(manifest: &DatasetManifest, percent: f64, seed: u64) -> Result<Vec<ManifestItem>, ModelError> {
    let labels: Vec<usize> = manifest.items.iter().map(|i| i.label as usize).collect();
    let idx = few_shot_indices(&labels, manifest.num_classes(), percent, seed)?;
    Ok(idx.into_iter().map(|i| manifest.items[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_rounding() {
        let labels: Vec<usize> = (0..11_964).map(|i| i % 8).collect();
        let idx = few_shot_indices(&labels, 8, 10.0, 3).unwrap();
        assert!((1_192..=1_200).contains(&idx.len()), "{}", idx.len());
        let mut per = [0usize; 8];
        for &i in &idx {
            per[labels[i]] += 1;
        }
        assert!(per.iter().all(|&c| c == 150));

        let small = vec![0usize; 10];
        assert_eq!(few_shot_indices(&small, 1, 1.0, 0).unwrap().len(), 1);
        assert_eq!(few_shot_indices(&small, 1, 100.0, 0).unwrap().len(), 10);
    }

    #[test]
    fn seeded_and_sorted() {
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let a = few_shot_indices(&labels, 4, 7.0, 9).unwrap();
        assert_eq!(a, few_shot_indices(&labels, 4, 7.0, 9).unwrap());
        assert_ne!(a, few_shot_indices(&labels, 4, 7.0, 10).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.len(), 28);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            few_shot_indices(&[0, 0], 2, 10.0, 0),
            Err(ModelError::EmptyClass(1))
        ));
        assert!(matches!(
            few_shot_indices(&[0], 1, 0.0, 0),
            Err(ModelError::InvalidPercent(_))
        ));
        assert!(matches!(
            few_shot_indices(&[0], 1, 120.0, 0),
            Err(ModelError::InvalidPercent(_))
        ));
        assert!(matches!(
            few_shot_indices(&[3], 2, 10.0, 0),
            Err(ModelError::InvalidLabel { .. })
        ));
    }
}
