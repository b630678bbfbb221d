//! Iterative label improvement: train a classifier on noisy labels, let it
//! relabel the training data, retrain from scratch, repeat.
//!
//! The crate covers the full loop at desk scale: synthetic Gaussian blob
//! datasets with an exact Bayes oracle, MNIST-format IDX loading, seeded
//! label-noise injection (uniform random or class-to-class bias), softmax
//! and one-hidden-layer MLP classifiers trained by mini-batch SGD, the
//! improvement loop in three variants (plain self-training, oscillating
//! semi-supervised, fragmentation chain), confidence-gated relabelling,
//! early stopping, and an experiment harness that sweeps noise fractions
//! and writes per-iteration CSVs.
//!
//! Everything is deterministic: one base seed fans out to every shuffle,
//! weight init, and noise draw through a tagged derivation scheme, so any
//! run can be replayed bit for bit.
//!
//! Start with the runnable examples:
//!
//! - `plain_ili_blobs`: repair 50% label noise on synthetic blobs
//! - `opili_ssl`: label a second subset without ever seeing its labels
//! - `fpili_chain`: walk a chain of partitions, labelling each once
//! - `confidence_filter`: what the relabel gate accepts and rejects
//! - `noise_models`: random vs. biased corruption, exact counts
//! - `sweep`: the full harness producing iterations.csv and summary.csv
//! - `mnist_idx`: the same loop on real MNIST, if the files are present
//!
//! ```
//! use ili::dataset::make_blobs;
//! use ili::engine::{run_plain, EvalSets, IliConfig};
//! use ili::noise::inject_random;
//!
//! let (train, _) = make_blobs(3, 100, 2, 6.0, 1)?;
//! let (val, _) = make_blobs(3, 40, 2, 6.0, 2)?;
//! let (test, _) = make_blobs(3, 40, 2, 6.0, 3)?;
//! let noisy = inject_random(&train.labels, 0.5, 3, 4)?;
//! let eval = EvalSets {
//!     x_val: val.features.view(),
//!     y_val: &val.labels,
//!     x_test: test.features.view(),
//!     y_test: &test.labels,
//! };
//! let config = IliConfig { max_iterations: 5, run_seed: 7, ..IliConfig::default() };
//! let result = run_plain(&config, train.features.view(), &noisy.labels, 3, &eval, Some(&train.labels))?;
//! assert!(result.history.len() >= 2);
//! # Ok::<(), ili::error::Error>(())
//! ```

pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod learner;
pub mod noise;
pub mod seed;

pub use dataset::{load_idx, make_blobs, partition, split, BayesOracle, Dataset, PartitionPlan, SplitPlan};
pub use engine::{
    early_stop_check, final_training, relative_improvement, run_fpili, run_opili, run_plain,
    EarlyStopping, EvalSets, IliConfig, IliResult, IterationRecord, SeedMode, StopReason, Variant,
};
pub use error::{Error, Result};
pub use experiment::{run_baseline, run_experiment, ExperimentConfig, ReportSummary};
pub use filter::{apply_filter, FilterOutcome, FilterSpec, DEFAULT_CONFIDENCE_THRESHOLD};
pub use learner::{
    Architecture, Augmentation, Learner, LearnerModel, LearnerSpec, PredictionResult, SgdLearner,
};
pub use noise::{inject, inject_bias, inject_random, label_accuracy, NoiseKind, NoiseSpec, NoisyLabels};
