//! Confidence gating between a model's predictions and the previous labels.
//!
//! Each improvement iteration proposes new labels; the filter decides,
//! per sample, whether the proposal replaces the label from the previous
//! iteration. Unfiltered always takes the proposal. Confidence takes it
//! only when the winning softmax probability strictly exceeds a threshold,
//! otherwise the old label survives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::PredictionResult;

/// Threshold used when a confidence filter is requested without one.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FilterSpec {
    /// Every prediction is accepted as the new label.
    Unfiltered,
    /// A prediction is accepted only when its confidence exceeds `threshold`
    /// strictly; ties keep the previous label.
    Confidence { threshold: f64 },
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if let FilterSpec::Confidence { threshold } = self {
            if !(0.0..=1.0).contains(threshold) || !threshold.is_finite() {
                return Err(Error::Config(format!(
                    "confidence threshold {threshold} outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

/// The labels after gating, with bookkeeping for reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub labels: Vec<usize>,
    /// Per sample: true when the model's prediction was taken.
    pub took_prediction: Vec<bool>,
    /// Samples whose prediction was accepted by the gate. Under Unfiltered
    /// this counts actual changes (prediction != previous); under Confidence
    /// it counts every accepted prediction, changed or not.
    pub replaced_count: usize,
    /// Complement of `replaced_count`: samples where the previous label was
    /// kept, or (Unfiltered) the prediction merely agreed with it.
    pub kept_count: usize,
}

/// Applies the gate sample by sample. `prev_labels` are the labels the
/// previous iteration settled on; `predictions` comes from this iteration's
/// model over the same samples in the same order.
pub fn apply_filter(
    spec: &FilterSpec,
    predictions: &PredictionResult,
    prev_labels: &[usize],
) -> Result<FilterOutcome> {
    spec.validate()?;
    if predictions.len() != prev_labels.len() {
        return Err(Error::Data(format!(
            "predictions cover {} samples but previous labels cover {}",
            predictions.len(),
            prev_labels.len()
        )));
    }
    let n = prev_labels.len();
    match spec {
        FilterSpec::Unfiltered => {
            let labels = predictions.predicted.clone();
            let replaced_count =
                labels.iter().zip(prev_labels).filter(|(new, old)| new != old).count();
            Ok(FilterOutcome {
                labels,
                took_prediction: vec![true; n],
                replaced_count,
                kept_count: n - replaced_count,
            })
        }
        FilterSpec::Confidence { threshold } => {
            let mut labels = Vec::with_capacity(n);
            let mut took_prediction = Vec::with_capacity(n);
            let mut replaced_count = 0;
            for (i, &previous) in prev_labels.iter().enumerate() {
                let take = predictions.confidence[i] > *threshold;
                labels.push(if take { predictions.predicted[i] } else { previous });
                took_prediction.push(take);
                if take {
                    replaced_count += 1;
                }
            }
            Ok(FilterOutcome { labels, took_prediction, replaced_count, kept_count: n - replaced_count })
        }
    }
}
