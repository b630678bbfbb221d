//! Controlled label corruption and label-accuracy measurement.
//!
//! Random errors pick exactly round(fraction * N) positions uniformly without
//! replacement and redraw each picked label uniformly from the other K-1
//! classes. Bias errors relabel, per source class, exactly
//! round(fraction * count(source)) samples to one fixed target class.
//! Counts round half to even; the same spec always produces the same output.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::permutation_with_rng;
use crate::error::{Error, Result};

/// What kind of corruption to apply.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    /// Uniform errors: any class but the original, all equally likely.
    Random,
    /// Fixed class mapping, e.g. {4 -> 7}: a four is mislabelled as a seven
    /// and never as anything else.
    Bias(BTreeMap<usize, usize>),
}

/// A fully determined corruption: kind, fraction of labels affected, seed.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub fraction: f64,
    pub seed: u64,
}

/// Corrupted labels plus exact bookkeeping of what changed.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyLabels {
    pub labels: Vec<usize>,
    /// True exactly where `labels` differs from the clean input.
    pub changed_mask: Vec<bool>,
    /// The clean input labels.
    pub clean_reference: Option<Vec<usize>>,
}

impl NoisyLabels {
    pub fn changed_count(&self) -> usize {
        self.changed_mask.iter().filter(|&&c| c).count()
    }
}

/// Number of labels to corrupt: fraction * n, rounded half to even.
pub fn corrupted_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round_ties_even() as usize
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("noise fraction {fraction} outside [0,1]")));
    }
    Ok(())
}

fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::Config(format!("noise needs at least 2 classes, got {num_classes}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Data(format!("label {bad} out of range for {num_classes} classes")));
    }
    Ok(())
}

/// Applies a noise spec to clean labels.
pub fn inject(spec: &NoiseSpec, labels: &[usize], num_classes: usize) -> Result<NoisyLabels> {
    match &spec.kind {
        NoiseKind::Random => inject_random(labels, spec.fraction, num_classes, spec.seed),
        NoiseKind::Bias(mapping) => {
            inject_bias(labels, mapping, spec.fraction, num_classes, spec.seed)
        }
    }
}

/// Corrupts exactly round(fraction * N) labels, chosen uniformly without
/// replacement; each replacement is drawn uniformly from the other K-1
/// classes, so every changed label differs from the original.
pub fn inject_random(
    labels: &[usize],
    fraction: f64,
    num_classes: usize,
    seed: u64,
) -> Result<NoisyLabels> {
    check_fraction(fraction)?;
    check_labels(labels, num_classes)?;
    let n = labels.len();
    let count = corrupted_count(fraction, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = permutation_with_rng(n, &mut rng)
        .into_iter()
        .take(count)
        .collect();
    selected.sort_unstable();

    let mut noisy = labels.to_vec();
    let mut changed = vec![false; n];
    for &i in &selected {
        // uniform over the K-1 classes other than the original
        let r = rng.gen_range(0..num_classes - 1);
        noisy[i] = if r >= labels[i] { r + 1 } else { r };
        changed[i] = true;
    }
    Ok(NoisyLabels { labels: noisy, changed_mask: changed, clean_reference: Some(labels.to_vec()) })
}

/// For each source class in the mapping, relabels exactly
/// round(fraction * count(source)) of its samples to the mapped target,
/// chosen uniformly without replacement. Other classes are untouched.
pub fn inject_bias(
    labels: &[usize],
    mapping: &BTreeMap<usize, usize>,
    fraction: f64,
    num_classes: usize,
    seed: u64,
) -> Result<NoisyLabels> {
    check_fraction(fraction)?;
    check_labels(labels, num_classes)?;
    if mapping.is_empty() {
        return Err(Error::Config("bias noise needs a non-empty class mapping".into()));
    }
    for (&source, &target) in mapping {
        if source >= num_classes || target >= num_classes {
            return Err(Error::Config(format!(
                "bias mapping {source}->{target} outside {num_classes} classes"
            )));
        }
        if source == target {
            return Err(Error::Config(format!("bias mapping {source}->{target} maps a class to itself")));
        }
    }

    let mut noisy = labels.to_vec();
    let mut changed = vec![false; labels.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // BTreeMap iteration is sorted by source class, so draws are reproducible.
    for (&source, &target) in mapping {
        let positions: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == source)
            .map(|(i, _)| i)
            .collect();
        let count = corrupted_count(fraction, positions.len());
        for &p in permutation_with_rng(positions.len(), &mut rng).iter().take(count) {
            noisy[positions[p]] = target;
            changed[positions[p]] = true;
        }
    }
    Ok(NoisyLabels { labels: noisy, changed_mask: changed, clean_reference: Some(labels.to_vec()) })
}

/// Fraction of positions where `labels` agrees with `reference`.
pub fn label_accuracy(labels: &[usize], reference: &[usize]) -> Result<f64> {
    if labels.len() != reference.len() {
        return Err(Error::Data(format!(
            "label vectors differ in length: {} vs {}",
            labels.len(),
            reference.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Data("label accuracy of empty vectors is undefined".into()));
    }
    let matches = labels.iter().zip(reference).filter(|(a, b)| a == b).count();
    Ok(matches as f64 / labels.len() as f64)
}
