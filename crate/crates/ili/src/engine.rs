//! The label-improvement loop in its three shapes.
//!
//! All variants share one skeleton: train a model from scratch, let it
//! relabel data it did not memorize those labels from, train again on the
//! improved labels. Plain relabels the full training pool with itself.
//! Oscillating bounces between two disjoint subsets, needing seed labels
//! only for the first. Fragmentation walks a chain of partitions, each
//! labelled exactly once by a model that has never seen it.
//!
//! Every fit inside a run derives its own init and shuffle seeds from the
//! run seed, the iteration index, and the model's role, so reruns are
//! bit-identical and no iteration inherits weights from the previous one.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::filter::{apply_filter, FilterSpec};
use crate::learner::{Learner, LearnerModel, LearnerSpec, SgdLearner};
use crate::seed::{derive, role};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum Variant {
    /// Self-training on one labelled pool.
    Plain,
    /// Two disjoint subsets labelling each other; only the first needs labels.
    Oscillating,
    /// A labelled reference set plus a chain of `n_partitions` unlabelled
    /// partitions, each predicted once by a model trained on the previous one.
    Fragmentation { n_partitions: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeedMode {
    /// Seed labels steer only the first fit; later fits see them no more.
    Init,
    /// Every chain fit re-includes the reference set, replicated to boost
    /// its weight against the partition it is paired with.
    Ref { replication_factor: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub enabled: bool,
    /// Consecutive iterations without a new best validation accuracy
    /// tolerated before stopping.
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping { enabled: true, patience: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IliConfig {
    pub variant: Variant,
    pub seed_mode: SeedMode,
    pub filter: FilterSpec,
    pub max_iterations: usize,
    pub early_stopping: EarlyStopping,
    /// Train one extra model on every subset with the final labels.
    pub final_training: bool,
    pub learner: LearnerSpec,
    pub run_seed: u64,
}

impl Default for IliConfig {
    fn default() -> Self {
        IliConfig {
            variant: Variant::Plain,
            seed_mode: SeedMode::Init,
            filter: FilterSpec::Unfiltered,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            early_stopping: EarlyStopping::default(),
            final_training: false,
            learner: LearnerSpec::default(),
            run_seed: 0,
        }
    }
}

impl IliConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.early_stopping.patience == 0 {
            return Err(Error::Config("early-stopping patience must be at least 1".into()));
        }
        if let Variant::Fragmentation { n_partitions } = self.variant {
            if n_partitions < 2 {
                return Err(Error::Config(format!(
                    "fragmentation needs at least 2 partitions, got {n_partitions}"
                )));
            }
        }
        if let SeedMode::Ref { replication_factor } = self.seed_mode {
            if !(replication_factor >= 1.0 && replication_factor.is_finite()) {
                return Err(Error::Config(format!(
                    "replication_factor must be at least 1, got {replication_factor}"
                )));
            }
            if !matches!(self.variant, Variant::Fragmentation { .. }) {
                return Err(Error::Config(
                    "ref seeding needs a reference subset; only the fragmentation variant has one"
                        .into(),
                ));
            }
        }
        self.filter.validate()?;
        self.learner.validate()
    }
}

/// Metrics captured after each iteration's model is trained.
/// Iteration 0 is the initial training on the seed labels.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Agreement of the currently assigned labels with the clean reference,
    /// over the samples that have both; absent when no reference was given.
    pub train_label_accuracy_vs_clean: Option<f64>,
    /// Labels (re)assigned while producing this iteration's training labels.
    /// A partition's first labelling counts all of its samples.
    pub replaced_count: usize,
    /// Mean winning-class probability of this iteration's model over the
    /// samples it is about to relabel.
    pub mean_confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    EarlyStop,
}

/// One extra fit on all subsets with the run's final labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalTraining<M> {
    pub model: M,
    pub record: IterationRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IliResult<M> {
    pub history: Vec<IterationRecord>,
    /// Labels for every training sample, subsets concatenated in input order.
    pub final_labels: Vec<usize>,
    pub final_model: M,
    pub stopped_reason: StopReason,
    pub final_training: Option<FinalTraining<M>>,
}

/// Held-out sets used for the per-iteration metrics. Never trained on.
#[derive(Clone)]
pub struct EvalSets<'a> {
    pub x_val: ArrayView2<'a, f64>,
    pub y_val: &'a [usize],
    pub x_test: ArrayView2<'a, f64>,
    pub y_test: &'a [usize],
}

impl EvalSets<'_> {
    pub fn validate(&self, dim: usize, num_classes: usize) -> Result<()> {
        check_set("validation set", self.x_val, dim)?;
        check_labels("validation set", self.x_val.nrows(), self.y_val, num_classes)?;
        check_set("test set", self.x_test, dim)?;
        check_labels("test set", self.x_test.nrows(), self.y_test, num_classes)
    }
}

/// True when the latest validation accuracies have failed to strictly beat
/// the best-so-far for `patience` consecutive iterations.
pub fn early_stop_check(history: &[IterationRecord], patience: usize) -> bool {
    let Some(first) = history.first() else { return false };
    let mut best = first.val_accuracy;
    let mut streak = 0;
    for record in &history[1..] {
        if record.val_accuracy > best {
            best = record.val_accuracy;
            streak = 0;
        } else {
            streak += 1;
        }
    }
    streak >= patience
}

/// Percent change in test accuracy from the first record to the last.
pub fn relative_improvement(history: &[IterationRecord]) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::Data("relative improvement needs at least 2 records".into()));
    }
    let first = history[0].test_accuracy;
    let last = history[history.len() - 1].test_accuracy;
    if first == 0.0 {
        return Err(Error::Data("first test accuracy is zero; relative improvement undefined".into()));
    }
    Ok(100.0 * (last - first) / first)
}

/// Self-training: iteration 0 fits the seed labels; every later iteration
/// relabels the pool with the previous model (through the filter),
/// reinitializes, and refits. `y_clean` is a metrics-only reference.
pub fn run_plain_with<L: Learner>(
    learner: &L,
    config: &IliConfig,
    x_train: ArrayView2<f64>,
    y_seed: &[usize],
    num_classes: usize,
    eval: &EvalSets,
    y_clean: Option<&[usize]>,
) -> Result<IliResult<L::Model>> {
    config.validate()?;
    if !matches!(config.variant, Variant::Plain) {
        return Err(Error::Config("config variant is not Plain".into()));
    }
    let dim = x_train.ncols();
    check_set("training set", x_train, dim)?;
    check_labels("training set", x_train.nrows(), y_seed, num_classes)?;
    check_clean("training set", y_clean, x_train.nrows())?;
    eval.validate(dim, num_classes)?;

    let mut y_cur = y_seed.to_vec();
    let mut history: Vec<IterationRecord> = Vec::new();
    let (init0, fit0) = model_seeds(config.run_seed, 0, role::INIT_A, role::FIT_A);
    let mut model = learner.train(x_train, &y_cur, num_classes, init0, fit0)?;
    let mut pred_train = learner.predict(&model, x_train)?;
    history.push(IterationRecord {
        iteration: 0,
        val_accuracy: eval_accuracy(learner, &model, eval.x_val, eval.y_val)?,
        test_accuracy: eval_accuracy(learner, &model, eval.x_test, eval.y_test)?,
        train_label_accuracy_vs_clean: clean_accuracy(&pair(y_clean, &y_cur)),
        replaced_count: 0,
        mean_confidence: pred_train.mean_confidence(),
    });

    let mut stopped_reason = StopReason::MaxIterations;
    for i in 1..=config.max_iterations {
        if config.early_stopping.enabled
            && early_stop_check(&history, config.early_stopping.patience)
        {
            stopped_reason = StopReason::EarlyStop;
            break;
        }
        let outcome = apply_filter(&config.filter, &pred_train, &y_cur)?;
        y_cur = outcome.labels;
        let (init, fit) = model_seeds(config.run_seed, i, role::INIT_A, role::FIT_A);
        model = learner.train(x_train, &y_cur, num_classes, init, fit)?;
        pred_train = learner.predict(&model, x_train)?;
        history.push(IterationRecord {
            iteration: i,
            val_accuracy: eval_accuracy(learner, &model, eval.x_val, eval.y_val)?,
            test_accuracy: eval_accuracy(learner, &model, eval.x_test, eval.y_test)?,
            train_label_accuracy_vs_clean: clean_accuracy(&pair(y_clean, &y_cur)),
            replaced_count: outcome.replaced_count,
            mean_confidence: pred_train.mean_confidence(),
        });
    }

    let final_fit = if config.final_training {
        let next = history.last().expect("history has iteration 0").iteration + 1;
        Some(final_training(
            learner,
            config.run_seed,
            &[x_train],
            &y_cur,
            num_classes,
            eval,
            y_clean,
            next,
        )?)
    } else {
        None
    };
    Ok(IliResult {
        history,
        final_labels: y_cur,
        final_model: model,
        stopped_reason,
        final_training: final_fit,
    })
}

/// Oscillating improvement over two disjoint subsets. Only A arrives with
/// labels; each iteration the A-model labels B, a fresh B-model fits B and
/// labels A, and a fresh A-model fits A. Models predict only the subset
/// they did not train on. Clean labels, when given, feed metrics only.
#[allow(clippy::too_many_arguments)]
pub fn run_opili_with<L: Learner>(
    learner: &L,
    config: &IliConfig,
    x_a: ArrayView2<f64>,
    y_a_seed: &[usize],
    x_b: ArrayView2<f64>,
    num_classes: usize,
    eval: &EvalSets,
    y_clean_a: Option<&[usize]>,
    y_clean_b: Option<&[usize]>,
) -> Result<IliResult<L::Model>> {
    config.validate()?;
    if !matches!(config.variant, Variant::Oscillating) {
        return Err(Error::Config("config variant is not Oscillating".into()));
    }
    let dim = x_a.ncols();
    check_set("subset A", x_a, dim)?;
    check_labels("subset A", x_a.nrows(), y_a_seed, num_classes)?;
    check_set("subset B", x_b, dim)?;
    check_disjoint(&[("subset A".into(), x_a), ("subset B".into(), x_b)])?;
    check_clean("subset A", y_clean_a, x_a.nrows())?;
    check_clean("subset B", y_clean_b, x_b.nrows())?;
    eval.validate(dim, num_classes)?;

    let mut y_a = y_a_seed.to_vec();
    let mut y_b: Option<Vec<usize>> = None;
    let mut history: Vec<IterationRecord> = Vec::new();
    let (init0, fit0) = model_seeds(config.run_seed, 0, role::INIT_A, role::FIT_A);
    let mut model_a = learner.train(x_a, &y_a, num_classes, init0, fit0)?;
    let mut pred_b = learner.predict(&model_a, x_b)?;
    history.push(IterationRecord {
        iteration: 0,
        val_accuracy: eval_accuracy(learner, &model_a, eval.x_val, eval.y_val)?,
        test_accuracy: eval_accuracy(learner, &model_a, eval.x_test, eval.y_test)?,
        train_label_accuracy_vs_clean: clean_accuracy(&pair(y_clean_a, &y_a)),
        replaced_count: 0,
        mean_confidence: pred_b.mean_confidence(),
    });

    let mut stopped_reason = StopReason::MaxIterations;
    for i in 1..=config.max_iterations {
        if config.early_stopping.enabled
            && early_stop_check(&history, config.early_stopping.patience)
        {
            stopped_reason = StopReason::EarlyStop;
            break;
        }
        // B's first labels are taken wholesale: there is nothing to filter against.
        let (y_b_new, replaced_b) = match &y_b {
            None => (pred_b.predicted.clone(), x_b.nrows()),
            Some(prev) => {
                let outcome = apply_filter(&config.filter, &pred_b, prev)?;
                (outcome.labels, outcome.replaced_count)
            }
        };
        let y_b_new_ref = y_b.insert(y_b_new);
        let (init_b, fit_b) = model_seeds(config.run_seed, i, role::INIT_B, role::FIT_B);
        let model_b = learner.train(x_b, y_b_new_ref, num_classes, init_b, fit_b)?;
        let pred_a = learner.predict(&model_b, x_a)?;
        let outcome_a = apply_filter(&config.filter, &pred_a, &y_a)?;
        y_a = outcome_a.labels;
        let (init_a, fit_a) = model_seeds(config.run_seed, i, role::INIT_A, role::FIT_A);
        model_a = learner.train(x_a, &y_a, num_classes, init_a, fit_a)?;
        pred_b = learner.predict(&model_a, x_b)?;

        let mut pairs = pair(y_clean_a, &y_a);
        if let (Some(y_b_cur), Some(clean_b)) = (&y_b, y_clean_b) {
            pairs.push((y_b_cur.clone(), clean_b));
        }
        history.push(IterationRecord {
            iteration: i,
            val_accuracy: eval_accuracy(learner, &model_a, eval.x_val, eval.y_val)?,
            test_accuracy: eval_accuracy(learner, &model_a, eval.x_test, eval.y_test)?,
            train_label_accuracy_vs_clean: clean_accuracy(&pairs),
            replaced_count: replaced_b + outcome_a.replaced_count,
            mean_confidence: pred_b.mean_confidence(),
        });
    }

    // max_iterations >= 1 and the stop check cannot fire before iteration 1,
    // so B is always labelled by the time we get here
    let y_b = y_b.expect("loop labelled B at least once");
    let mut final_labels = y_a;
    final_labels.extend_from_slice(&y_b);

    let final_fit = if config.final_training {
        let union_clean = both_clean(&[(y_clean_a, x_a.nrows()), (y_clean_b, x_b.nrows())]);
        let next = history.last().expect("history has iteration 0").iteration + 1;
        Some(final_training(
            learner,
            config.run_seed,
            &[x_a, x_b],
            &final_labels,
            num_classes,
            eval,
            union_clean.as_deref(),
            next,
        )?)
    } else {
        None
    };
    Ok(IliResult {
        history,
        final_labels,
        final_model: model_a,
        stopped_reason,
        final_training: final_fit,
    })
}

/// Fragmentation chain: a labelled reference set A and partitions that are
/// each predicted exactly once by a model that never trained on them.
/// Iteration 0 fits A and labels the first partition; iteration i fits the
/// previous partition (Init mode) or [replicated A, previous partition]
/// (Ref mode) and labels the next. The chain always visits every partition,
/// so early stopping does not apply and the run ends at the last partition.
#[allow(clippy::too_many_arguments)]
pub fn run_fpili_with<L: Learner>(
    learner: &L,
    config: &IliConfig,
    x_a: ArrayView2<f64>,
    y_a: &[usize],
    partitions: &[ArrayView2<f64>],
    num_classes: usize,
    eval: &EvalSets,
    y_clean_a: Option<&[usize]>,
    y_clean_partitions: Option<&[&[usize]]>,
) -> Result<IliResult<L::Model>> {
    config.validate()?;
    let n_partitions = match config.variant {
        Variant::Fragmentation { n_partitions } => n_partitions,
        _ => return Err(Error::Config("config variant is not Fragmentation".into())),
    };
    if partitions.len() != n_partitions {
        return Err(Error::Config(format!(
            "config names {n_partitions} partitions but {} were supplied",
            partitions.len()
        )));
    }
    // One loop pass per partition after the first keeps the history within
    // the configured bound.
    if config.max_iterations < n_partitions - 1 {
        return Err(Error::Config(format!(
            "{n_partitions} partitions need max_iterations >= {}",
            n_partitions - 1
        )));
    }
    let dim = x_a.ncols();
    check_set("subset A", x_a, dim)?;
    check_labels("subset A", x_a.nrows(), y_a, num_classes)?;
    check_clean("subset A", y_clean_a, x_a.nrows())?;
    let mut sets = vec![("subset A".to_string(), x_a)];
    for (j, part) in partitions.iter().enumerate() {
        check_set(&format!("partition {j}"), *part, dim)?;
        sets.push((format!("partition {j}"), *part));
    }
    check_disjoint(&sets)?;
    if let Some(cleans) = y_clean_partitions {
        if cleans.len() != partitions.len() {
            return Err(Error::Data(format!(
                "{} partitions but {} clean references",
                partitions.len(),
                cleans.len()
            )));
        }
        for (j, (part, clean)) in partitions.iter().zip(cleans).enumerate() {
            check_clean(&format!("partition {j}"), Some(clean), part.nrows())?;
        }
    }
    eval.validate(dim, num_classes)?;

    let replicated = match config.seed_mode {
        SeedMode::Init => None,
        SeedMode::Ref { replication_factor } => {
            Some(replicate_reference(x_a, y_a, replication_factor))
        }
    };

    let clean_pairs = |y_parts: &[Vec<usize>]| {
        let mut pairs = pair(y_clean_a, y_a);
        if let Some(cleans) = y_clean_partitions {
            for (labels, clean) in y_parts.iter().zip(cleans) {
                pairs.push((labels.clone(), clean));
            }
        }
        clean_accuracy(&pairs)
    };

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut y_parts: Vec<Vec<usize>> = Vec::with_capacity(partitions.len());
    let (init0, fit0) = model_seeds(config.run_seed, 0, role::INIT_A, role::FIT_A);
    let mut model = learner.train(x_a, y_a, num_classes, init0, fit0)?;
    let pred0 = learner.predict(&model, partitions[0])?;
    y_parts.push(pred0.predicted.clone());
    history.push(IterationRecord {
        iteration: 0,
        val_accuracy: eval_accuracy(learner, &model, eval.x_val, eval.y_val)?,
        test_accuracy: eval_accuracy(learner, &model, eval.x_test, eval.y_test)?,
        train_label_accuracy_vs_clean: clean_pairs(&y_parts),
        replaced_count: partitions[0].nrows(),
        mean_confidence: pred0.mean_confidence(),
    });

    for i in 1..partitions.len() {
        let (init, fit) = model_seeds(config.run_seed, i, role::INIT_A, role::FIT_A);
        model = match &replicated {
            None => learner.train(partitions[i - 1], &y_parts[i - 1], num_classes, init, fit)?,
            Some((x_rep, y_rep)) => {
                let x = concatenate(Axis(0), &[x_rep.view(), partitions[i - 1]])
                    .map_err(|e| Error::Data(format!("assembling training set: {e}")))?;
                let mut y = y_rep.clone();
                y.extend_from_slice(&y_parts[i - 1]);
                learner.train(x.view(), &y, num_classes, init, fit)?
            }
        };
        let pred = learner.predict(&model, partitions[i])?;
        y_parts.push(pred.predicted.clone());
        history.push(IterationRecord {
            iteration: i,
            val_accuracy: eval_accuracy(learner, &model, eval.x_val, eval.y_val)?,
            test_accuracy: eval_accuracy(learner, &model, eval.x_test, eval.y_test)?,
            train_label_accuracy_vs_clean: clean_pairs(&y_parts),
            replaced_count: partitions[i].nrows(),
            mean_confidence: pred.mean_confidence(),
        });
    }

    let mut final_labels = y_a.to_vec();
    for labels in &y_parts {
        final_labels.extend_from_slice(labels);
    }

    let final_fit = if config.final_training {
        let union_clean = match (y_clean_a, y_clean_partitions) {
            (Some(clean_a), Some(cleans)) => {
                let mut v = clean_a.to_vec();
                for clean in cleans {
                    v.extend_from_slice(clean);
                }
                Some(v)
            }
            _ => None,
        };
        let mut subsets = vec![x_a];
        subsets.extend_from_slice(partitions);
        let next = history.last().expect("history has iteration 0").iteration + 1;
        Some(final_training(
            learner,
            config.run_seed,
            &subsets,
            &final_labels,
            num_classes,
            eval,
            union_clean.as_deref(),
            next,
        )?)
    } else {
        None
    };
    Ok(IliResult {
        history,
        final_labels,
        final_model: model,
        stopped_reason: StopReason::MaxIterations,
        final_training: final_fit,
    })
}

pub fn run_plain(
    config: &IliConfig,
    x_train: ArrayView2<f64>,
    y_seed: &[usize],
    num_classes: usize,
    eval: &EvalSets,
    y_clean: Option<&[usize]>,
) -> Result<IliResult<LearnerModel>> {
    let learner = SgdLearner::new(config.learner.clone());
    run_plain_with(&learner, config, x_train, y_seed, num_classes, eval, y_clean)
}

#[allow(clippy::too_many_arguments)]
pub fn run_opili(
    config: &IliConfig,
    x_a: ArrayView2<f64>,
    y_a_seed: &[usize],
    x_b: ArrayView2<f64>,
    num_classes: usize,
    eval: &EvalSets,
    y_clean_a: Option<&[usize]>,
    y_clean_b: Option<&[usize]>,
) -> Result<IliResult<LearnerModel>> {
    let learner = SgdLearner::new(config.learner.clone());
    run_opili_with(&learner, config, x_a, y_a_seed, x_b, num_classes, eval, y_clean_a, y_clean_b)
}

#[allow(clippy::too_many_arguments)]
pub fn run_fpili(
    config: &IliConfig,
    x_a: ArrayView2<f64>,
    y_a: &[usize],
    partitions: &[ArrayView2<f64>],
    num_classes: usize,
    eval: &EvalSets,
    y_clean_a: Option<&[usize]>,
    y_clean_partitions: Option<&[&[usize]]>,
) -> Result<IliResult<LearnerModel>> {
    let learner = SgdLearner::new(config.learner.clone());
    run_fpili_with(
        &learner,
        config,
        x_a,
        y_a,
        partitions,
        num_classes,
        eval,
        y_clean_a,
        y_clean_partitions,
    )
}

/// One fresh fit on the concatenation of all subsets with the run's final
/// labels. Uses dedicated seed roles so it never collides with an
/// iteration's fit; the record's iteration index is supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub fn final_training<L: Learner>(
    learner: &L,
    run_seed: u64,
    subsets: &[ArrayView2<f64>],
    labels: &[usize],
    num_classes: usize,
    eval: &EvalSets,
    y_clean: Option<&[usize]>,
    iteration: usize,
) -> Result<FinalTraining<L::Model>> {
    if subsets.is_empty() {
        return Err(Error::Data("final training needs at least one subset".into()));
    }
    let dim = subsets[0].ncols();
    for (j, subset) in subsets.iter().enumerate() {
        check_set(&format!("final training subset {j}"), *subset, dim)?;
    }
    let total: usize = subsets.iter().map(|s| s.nrows()).sum();
    check_labels("final training", total, labels, num_classes)?;
    check_clean("final training", y_clean, total)?;
    let x = concatenate(Axis(0), subsets)
        .map_err(|e| Error::Data(format!("assembling final training set: {e}")))?;
    let (init, fit) = model_seeds(run_seed, 0, role::INIT_FINAL, role::FIT_FINAL);
    let model = learner.train(x.view(), labels, num_classes, init, fit)?;
    let pred = learner.predict(&model, x.view())?;
    let record = IterationRecord {
        iteration,
        val_accuracy: eval_accuracy(learner, &model, eval.x_val, eval.y_val)?,
        test_accuracy: eval_accuracy(learner, &model, eval.x_test, eval.y_test)?,
        train_label_accuracy_vs_clean: clean_accuracy(&pair(y_clean, labels)),
        replaced_count: 0,
        mean_confidence: pred.mean_confidence(),
    };
    Ok(FinalTraining { model, record })
}

/// Reference replication for Ref mode: every sample floor(r) times, plus the
/// first round-to-even((r - floor(r)) * n) samples once more, so each sample
/// appears exactly floor(r) or ceil(r) times.
fn replicate_reference(x: ArrayView2<f64>, y: &[usize], factor: f64) -> (Array2<f64>, Vec<usize>) {
    let n = x.nrows();
    let full = factor.floor() as usize;
    let extra = crate::noise::corrupted_count(factor - factor.floor(), n);
    let mut rows: Vec<usize> = Vec::with_capacity(full * n + extra);
    for _ in 0..full {
        rows.extend(0..n);
    }
    rows.extend(0..extra);
    let x_rep = x.select(Axis(0), &rows);
    let y_rep = rows.iter().map(|&i| y[i]).collect();
    (x_rep, y_rep)
}

fn model_seeds(run_seed: u64, iteration: usize, init_role: u64, fit_role: u64) -> (u64, u64) {
    (
        derive(run_seed, &[iteration as u64, init_role]),
        derive(run_seed, &[iteration as u64, fit_role]),
    )
}

fn eval_accuracy<L: Learner>(
    learner: &L,
    model: &L::Model,
    x: ArrayView2<f64>,
    y: &[usize],
) -> Result<f64> {
    let pred = learner.predict(model, x)?;
    crate::noise::label_accuracy(&pred.predicted, y)
}

fn pair<'a>(clean: Option<&'a [usize]>, labels: &[usize]) -> Vec<(Vec<usize>, &'a [usize])> {
    match clean {
        Some(reference) => vec![(labels.to_vec(), reference)],
        None => Vec::new(),
    }
}

/// Agreement across all (labels, clean) pairs; None when nothing is covered.
fn clean_accuracy(pairs: &[(Vec<usize>, &[usize])]) -> Option<f64> {
    let total: usize = pairs.iter().map(|(labels, _)| labels.len()).sum();
    if total == 0 {
        return None;
    }
    let hits: usize = pairs
        .iter()
        .map(|(labels, clean)| labels.iter().zip(*clean).filter(|(a, b)| a == b).count())
        .sum();
    Some(hits as f64 / total as f64)
}

/// Concatenated clean labels when every piece has one, else None.
fn both_clean(pieces: &[(Option<&[usize]>, usize)]) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for (clean, _) in pieces {
        out.extend_from_slice((*clean)?);
    }
    Some(out)
}

fn check_set(name: &str, x: ArrayView2<f64>, dim: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Data(format!("{name} has no samples")));
    }
    if x.ncols() != dim {
        return Err(Error::Data(format!(
            "{name} has {} features, expected {dim}",
            x.ncols()
        )));
    }
    Ok(())
}

fn check_labels(name: &str, rows: usize, y: &[usize], num_classes: usize) -> Result<()> {
    if y.len() != rows {
        return Err(Error::Data(format!(
            "{name}: {rows} samples but {} labels",
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Data(format!(
            "{name}: label {bad} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

fn check_clean(name: &str, clean: Option<&[usize]>, rows: usize) -> Result<()> {
    if let Some(reference) = clean {
        if reference.len() != rows {
            return Err(Error::Data(format!(
                "{name}: clean reference has {} labels for {rows} samples",
                reference.len()
            )));
        }
    }
    Ok(())
}

/// Subsets must not share a sample; rows are compared by exact bit pattern.
fn check_disjoint(sets: &[(String, ArrayView2<f64>)]) -> Result<()> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (idx, (name, x)) in sets.iter().enumerate() {
        for row in x.rows() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            match seen.entry(key) {
                Entry::Occupied(entry) if *entry.get() != idx => {
                    return Err(Error::Data(format!(
                        "{} and {name} share a sample; subsets must be disjoint",
                        sets[*entry.get()].0
                    )));
                }
                Entry::Occupied(_) => {}
                Entry::Vacant(slot) => {
                    slot.insert(idx);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_blobs, partition, split, BayesOracle, Dataset, PartitionPlan, SplitPlan};
    use crate::learner::PredictionResult;
    use crate::noise::{inject_random, label_accuracy};
    use approx::assert_abs_diff_eq;
    use std::cell::RefCell;

    fn record(iteration: usize, val: f64) -> IterationRecord {
        IterationRecord {
            iteration,
            val_accuracy: val,
            test_accuracy: val,
            train_label_accuracy_vs_clean: None,
            replaced_count: 0,
            mean_confidence: 0.5,
        }
    }

    fn history(vals: &[f64]) -> Vec<IterationRecord> {
        vals.iter().enumerate().map(|(i, &v)| record(i, v)).collect()
    }

    #[test]
    fn early_stop_fires_only_after_patience_non_improving_steps() {
        assert!(!early_stop_check(&history(&[0.5, 0.6, 0.7]), 1));
        assert!(early_stop_check(&history(&[0.5, 0.7, 0.7]), 1));
        assert!(!early_stop_check(&history(&[0.5, 0.7, 0.69, 0.71]), 2));
        assert!(early_stop_check(&history(&[0.5, 0.7, 0.69, 0.68]), 2));
        assert!(!early_stop_check(&history(&[0.5]), 1));
        assert!(!early_stop_check(&[], 1));
    }

    #[test]
    fn relative_improvement_is_percent_change_of_test_accuracy() {
        assert_abs_diff_eq!(
            relative_improvement(&history(&[0.5, 0.55, 0.6])).unwrap(),
            20.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            relative_improvement(&history(&[0.7, 0.7])).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            relative_improvement(&history(&[0.2, 0.2687])).unwrap(),
            34.35,
            epsilon = 1e-9
        );
        assert!(relative_improvement(&history(&[0.5])).is_err());
        assert!(relative_improvement(&history(&[0.0, 0.5])).is_err());
    }

    #[test]
    fn config_validation_rejects_inconsistent_setups() {
        let ok = IliConfig::default();
        assert!(ok.validate().is_ok());
        let bad = IliConfig { max_iterations: 0, ..ok.clone() };
        assert!(bad.validate().is_err());
        let bad = IliConfig {
            early_stopping: EarlyStopping { enabled: true, patience: 0 },
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let bad = IliConfig { variant: Variant::Fragmentation { n_partitions: 1 }, ..ok.clone() };
        assert!(bad.validate().is_err());
        // replication needs the variant that has a reference subset
        let bad = IliConfig { seed_mode: SeedMode::Ref { replication_factor: 1.5 }, ..ok.clone() };
        assert!(bad.validate().is_err());
        let good = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 3 },
            seed_mode: SeedMode::Ref { replication_factor: 1.5 },
            ..ok.clone()
        };
        assert!(good.validate().is_ok());
        let bad = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 3 },
            seed_mode: SeedMode::Ref { replication_factor: 0.5 },
            ..ok
        };
        assert!(bad.validate().is_err());
    }

    struct Blobs {
        train: Dataset,
        val: Dataset,
        test: Dataset,
        oracle: BayesOracle,
    }

    fn blob_world(k: usize, per_class: usize, sep: f64) -> Blobs {
        let (train, oracle) = make_blobs(k, per_class, 2, sep, 100).unwrap();
        let (val, _) = make_blobs(k, per_class / 2, 2, sep, 101).unwrap();
        let (test, _) = make_blobs(k, per_class / 2, 2, sep, 102).unwrap();
        Blobs { train, val, test, oracle }
    }

    fn eval_of(b: &Blobs) -> EvalSets<'_> {
        EvalSets {
            x_val: b.val.features.view(),
            y_val: &b.val.labels,
            x_test: b.test.features.view(),
            y_test: &b.test.labels,
        }
    }

    // momentum off: on unscaled blob features it turns constant-rate SGD
    // into a noise ball whose endpoint accuracy is a coin flip
    fn quick_learner() -> LearnerSpec {
        LearnerSpec {
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.02,
            momentum: 0.0,
            ..LearnerSpec::default()
        }
    }

    #[test]
    fn plain_run_is_bit_deterministic() {
        let b = blob_world(3, 40, 5.0);
        let noisy = inject_random(&b.train.labels, 0.3, 3, 9).unwrap();
        let config = IliConfig {
            max_iterations: 3,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            learner: quick_learner(),
            run_seed: 42,
            final_training: true,
            ..IliConfig::default()
        };
        let run = || {
            run_plain(
                &config,
                b.train.features.view(),
                &noisy.labels,
                3,
                &eval_of(&b),
                Some(&b.train.labels),
            )
            .unwrap()
        };
        let first = run();
        assert_eq!(first, run());
        assert_eq!(first.history.len(), 4);
        let other_seed = IliConfig { run_seed: 43, ..config };
        let second = run_plain(
            &other_seed,
            b.train.features.view(),
            &noisy.labels,
            3,
            &eval_of(&b),
            Some(&b.train.labels),
        )
        .unwrap();
        assert_ne!(first.final_model.flat_params(), second.final_model.flat_params());
    }

    #[test]
    fn plain_with_clean_labels_stays_accurate() {
        let b = blob_world(3, 40, 6.0);
        let config = IliConfig {
            max_iterations: 3,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            learner: quick_learner(),
            run_seed: 7,
            ..IliConfig::default()
        };
        let result = run_plain(
            &config,
            b.train.features.view(),
            &b.train.labels,
            3,
            &eval_of(&b),
            Some(&b.train.labels),
        )
        .unwrap();
        assert_eq!(result.history.len(), 4);
        assert_eq!(result.stopped_reason, StopReason::MaxIterations);
        let last = result.history.last().unwrap();
        assert!(last.train_label_accuracy_vs_clean.unwrap() >= 0.98);
        assert!((last.test_accuracy - result.history[0].test_accuracy).abs() <= 0.05);
        assert_eq!(result.history[0].replaced_count, 0);
        assert_eq!(result.final_labels.len(), b.train.len());
    }

    #[test]
    fn saturated_confidence_threshold_freezes_the_labels() {
        let b = blob_world(3, 30, 4.0);
        let noisy = inject_random(&b.train.labels, 0.4, 3, 5).unwrap();
        let config = IliConfig {
            filter: FilterSpec::Confidence { threshold: 1.0 },
            max_iterations: 3,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            learner: quick_learner(),
            run_seed: 11,
            ..IliConfig::default()
        };
        let result = run_plain(
            &config,
            b.train.features.view(),
            &noisy.labels,
            3,
            &eval_of(&b),
            None,
        )
        .unwrap();
        assert_eq!(result.final_labels, noisy.labels);
        for rec in &result.history {
            assert_eq!(rec.replaced_count, 0);
            assert!(rec.train_label_accuracy_vs_clean.is_none());
        }
    }

    #[test]
    fn plateaued_validation_accuracy_stops_the_run_early() {
        // the oracle learner returns the same model every iteration, so the
        // validation accuracy can never improve past iteration 0
        let b = blob_world(3, 30, 6.0);
        let config = IliConfig {
            max_iterations: 8,
            learner: quick_learner(),
            run_seed: 3,
            ..IliConfig::default()
        };
        let result = run_plain_with(
            &b.oracle.clone(),
            &config,
            b.train.features.view(),
            &b.train.labels,
            3,
            &eval_of(&b),
            None,
        )
        .unwrap();
        assert_eq!(result.stopped_reason, StopReason::EarlyStop);
        assert_eq!(result.history.len(), 2);
        assert!(early_stop_check(&result.history, config.early_stopping.patience));
    }

    #[test]
    fn plain_rejects_mismatched_variant_and_inputs() {
        let b = blob_world(2, 20, 4.0);
        let config = IliConfig { variant: Variant::Oscillating, ..IliConfig::default() };
        assert!(run_plain(
            &config,
            b.train.features.view(),
            &b.train.labels,
            2,
            &eval_of(&b),
            None
        )
        .is_err());
        let config = IliConfig::default();
        let short = &b.train.labels[1..];
        assert!(run_plain(&config, b.train.features.view(), short, 2, &eval_of(&b), None).is_err());
    }

    fn split_ab(b: &Blobs) -> (Dataset, Dataset) {
        let plan = SplitPlan { fractions: vec![0.5, 0.5], seed: 17 };
        let mut parts = split(&b.train, &plan).unwrap();
        let subset_b = parts.pop().unwrap();
        let subset_a = parts.pop().unwrap();
        (subset_a, subset_b)
    }

    #[test]
    fn oscillating_with_an_oracle_labels_b_exactly() {
        let b = blob_world(3, 40, 6.0);
        let (sa, sb) = split_ab(&b);
        let config = IliConfig {
            variant: Variant::Oscillating,
            max_iterations: 1,
            learner: quick_learner(),
            run_seed: 21,
            ..IliConfig::default()
        };
        let result = run_opili_with(
            &b.oracle.clone(),
            &config,
            sa.features.view(),
            &sa.labels,
            sb.features.view(),
            3,
            &eval_of(&b),
            None,
            None,
        )
        .unwrap();
        let expected = b.oracle.predict(sb.features.view()).unwrap().predicted;
        assert_eq!(&result.final_labels[sa.len()..], &expected[..]);
        assert_eq!(result.final_labels.len(), sa.len() + sb.len());
        // iteration 1 labelled all of B plus whatever changed on A
        assert!(result.history[1].replaced_count >= sb.len());
    }

    #[test]
    fn oscillating_never_reads_clean_labels_of_b() {
        let b = blob_world(3, 40, 5.0);
        let (sa, sb) = split_ab(&b);
        let noisy_a = inject_random(&sa.labels, 0.3, 3, 8).unwrap();
        let config = IliConfig {
            variant: Variant::Oscillating,
            max_iterations: 3,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            learner: quick_learner(),
            run_seed: 31,
            ..IliConfig::default()
        };
        let run = |clean_b: Option<&[usize]>| {
            run_opili(
                &config,
                sa.features.view(),
                &noisy_a.labels,
                sb.features.view(),
                3,
                &eval_of(&b),
                Some(&sa.labels),
                clean_b,
            )
            .unwrap()
        };
        let sentinel_zero = vec![0; sb.len()];
        let sentinel_two = vec![2; sb.len()];
        let honest = run(Some(&sb.labels));
        let poisoned = run(Some(&sentinel_zero));
        let poisoned_again = run(Some(&sentinel_two));
        let absent = run(None);
        assert_eq!(honest.final_labels, poisoned.final_labels);
        assert_eq!(honest.final_labels, poisoned_again.final_labels);
        assert_eq!(honest.final_labels, absent.final_labels);
        assert_eq!(honest.final_model, poisoned.final_model);
        // the metric itself does move with the reference
        assert_ne!(
            honest.history.last().unwrap().train_label_accuracy_vs_clean,
            poisoned.history.last().unwrap().train_label_accuracy_vs_clean
        );
    }

    #[test]
    fn oscillating_rejects_overlapping_subsets() {
        let b = blob_world(2, 20, 4.0);
        let config = IliConfig { variant: Variant::Oscillating, ..IliConfig::default() };
        let err = run_opili(
            &config,
            b.train.features.view(),
            &b.train.labels,
            b.train.features.view(),
            2,
            &eval_of(&b),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    fn fragmentation_setup(b: &Blobs, n_partitions: usize) -> (Dataset, Vec<Dataset>) {
        let plan = PartitionPlan { n_partitions: n_partitions + 1, seed: 23 };
        let mut parts = partition(&b.train, &plan).unwrap();
        let reference = parts.remove(0);
        (reference, parts)
    }

    #[test]
    fn fragmentation_labels_every_partition_once_with_the_oracle() {
        let b = blob_world(3, 60, 6.0);
        let (reference, parts) = fragmentation_setup(&b, 3);
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let cleans: Vec<&[usize]> = parts.iter().map(|p| p.labels.as_slice()).collect();
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 3 },
            max_iterations: 10,
            learner: quick_learner(),
            run_seed: 19,
            ..IliConfig::default()
        };
        let result = run_fpili_with(
            &b.oracle.clone(),
            &config,
            reference.features.view(),
            &reference.labels,
            &views,
            3,
            &eval_of(&b),
            Some(&reference.labels),
            Some(&cleans),
        )
        .unwrap();
        assert_eq!(result.history.len(), 3);
        assert_eq!(result.stopped_reason, StopReason::MaxIterations);
        // concatenation covers A then each partition, labelled exactly once
        let mut offset = reference.len();
        for part in &parts {
            let expected = b.oracle.predict(part.features.view()).unwrap().predicted;
            assert_eq!(&result.final_labels[offset..offset + part.len()], &expected[..]);
            offset += part.len();
        }
        assert_eq!(offset, result.final_labels.len());
        for (i, rec) in result.history.iter().enumerate() {
            assert_eq!(rec.replaced_count, parts[i].len());
        }
    }

    #[test]
    fn fragmentation_ignores_clean_labels_of_partitions() {
        let b = blob_world(3, 60, 5.0);
        let (reference, parts) = fragmentation_setup(&b, 2);
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 2 },
            max_iterations: 10,
            learner: quick_learner(),
            run_seed: 29,
            ..IliConfig::default()
        };
        let run = |cleans: Option<&[&[usize]]>| {
            run_fpili(
                &config,
                reference.features.view(),
                &reference.labels,
                &views,
                3,
                &eval_of(&b),
                Some(&reference.labels),
                cleans,
            )
            .unwrap()
        };
        let honest: Vec<&[usize]> = parts.iter().map(|p| p.labels.as_slice()).collect();
        let zeros: Vec<Vec<usize>> = parts.iter().map(|p| vec![0; p.len()]).collect();
        let poisoned: Vec<&[usize]> = zeros.iter().map(|v| v.as_slice()).collect();
        let a = run(Some(&honest));
        let c = run(Some(&poisoned));
        let d = run(None);
        assert_eq!(a.final_labels, c.final_labels);
        assert_eq!(a.final_labels, d.final_labels);
        assert_eq!(a.final_model, c.final_model);
    }

    /// Wraps the oracle and records every training set it is handed.
    struct Recording {
        inner: BayesOracle,
        seen: RefCell<Vec<(Array2<f64>, Vec<usize>)>>,
    }

    impl Learner for Recording {
        type Model = BayesOracle;

        fn train(
            &self,
            x: ArrayView2<f64>,
            y: &[usize],
            num_classes: usize,
            init_seed: u64,
            fit_seed: u64,
        ) -> crate::error::Result<BayesOracle> {
            self.seen.borrow_mut().push((x.to_owned(), y.to_vec()));
            self.inner.train(x, y, num_classes, init_seed, fit_seed)
        }

        fn predict(
            &self,
            model: &BayesOracle,
            x: ArrayView2<f64>,
        ) -> crate::error::Result<PredictionResult> {
            model.predict(x)
        }
    }

    #[test]
    fn ref_mode_replicates_the_reference_set_into_every_chain_fit() {
        let b = blob_world(2, 30, 6.0);
        let (reference, parts) = fragmentation_setup(&b, 2);
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 2 },
            seed_mode: SeedMode::Ref { replication_factor: 1.5 },
            max_iterations: 10,
            learner: quick_learner(),
            run_seed: 37,
            ..IliConfig::default()
        };
        let probe = Recording { inner: b.oracle.clone(), seen: RefCell::new(Vec::new()) };
        run_fpili_with(
            &probe,
            &config,
            reference.features.view(),
            &reference.labels,
            &views,
            2,
            &eval_of(&b),
            None,
            None,
        )
        .unwrap();
        let seen = probe.seen.borrow();
        assert_eq!(seen.len(), 2); // initial fit on A, then one chain fit
        let (chain_x, _) = &seen[1];
        let n = reference.len();
        let extra = n / 2; // 1.5 replication: half the samples appear twice
        assert_eq!(chain_x.nrows(), n + extra + parts[0].len());
        // count occurrences of each reference row in the assembled set
        for (i, row) in reference.features.rows().into_iter().enumerate() {
            let hits = chain_x
                .rows()
                .into_iter()
                .filter(|r| r.iter().zip(row.iter()).all(|(a, b)| a == b))
                .count();
            let expected = if i < extra { 2 } else { 1 };
            assert_eq!(hits, expected, "reference row {i}");
        }
    }

    #[test]
    fn init_mode_chain_fits_see_only_the_previous_partition() {
        let b = blob_world(2, 30, 6.0);
        let (reference, parts) = fragmentation_setup(&b, 3);
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 3 },
            max_iterations: 10,
            learner: quick_learner(),
            run_seed: 41,
            ..IliConfig::default()
        };
        let probe = Recording { inner: b.oracle.clone(), seen: RefCell::new(Vec::new()) };
        run_fpili_with(
            &probe,
            &config,
            reference.features.view(),
            &reference.labels,
            &views,
            2,
            &eval_of(&b),
            None,
            None,
        )
        .unwrap();
        let seen = probe.seen.borrow();
        assert_eq!(seen.len(), 3);
        assert_eq!(seen[0].0, reference.features);
        assert_eq!(seen[1].0, parts[0].features);
        assert_eq!(seen[2].0, parts[1].features);
    }

    #[test]
    fn fragmentation_validates_partition_counts() {
        let b = blob_world(2, 30, 5.0);
        let (reference, parts) = fragmentation_setup(&b, 2);
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 3 },
            ..IliConfig::default()
        };
        assert!(run_fpili(
            &config,
            reference.features.view(),
            &reference.labels,
            &views,
            2,
            &eval_of(&b),
            None,
            None
        )
        .is_err());
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 2 },
            max_iterations: 10,
            learner: quick_learner(),
            ..IliConfig::default()
        };
        let overlapping = vec![views[0], views[0]];
        assert!(run_fpili(
            &config,
            reference.features.view(),
            &reference.labels,
            &overlapping,
            2,
            &eval_of(&b),
            None,
            None
        )
        .is_err());
    }

    #[test]
    fn fragmentation_needs_enough_iterations_for_the_chain() {
        let b = blob_world(2, 30, 5.0);
        let (reference, parts) = fragmentation_setup(&b, 3);
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: 3 },
            max_iterations: 1,
            learner: quick_learner(),
            ..IliConfig::default()
        };
        let err = run_fpili(
            &config,
            reference.features.view(),
            &reference.labels,
            &views,
            2,
            &eval_of(&b),
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn final_training_replays_the_dedicated_seeds_exactly() {
        let b = blob_world(3, 40, 5.0);
        let noisy = inject_random(&b.train.labels, 0.4, 3, 13).unwrap();
        let config = IliConfig {
            max_iterations: 2,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            final_training: true,
            learner: quick_learner(),
            run_seed: 55,
            ..IliConfig::default()
        };
        let result = run_plain(
            &config,
            b.train.features.view(),
            &noisy.labels,
            3,
            &eval_of(&b),
            None,
        )
        .unwrap();
        let ft = result.final_training.as_ref().unwrap();
        assert_eq!(ft.record.iteration, 3);
        assert_eq!(ft.record.replaced_count, 0);
        let learner = SgdLearner::new(config.learner.clone());
        let manual = learner
            .train(
                b.train.features.view(),
                &result.final_labels,
                3,
                derive(config.run_seed, &[0, role::INIT_FINAL]),
                derive(config.run_seed, &[0, role::FIT_FINAL]),
            )
            .unwrap();
        assert_eq!(ft.model, manual);
    }

    #[test]
    fn final_training_after_oscillation_keeps_test_accuracy() {
        let mut holds = 0;
        for seed in 0..5 {
            let (train, _) = make_blobs(3, 60, 2, 6.0, 200 + seed).unwrap();
            let (val, _) = make_blobs(3, 30, 2, 6.0, 300 + seed).unwrap();
            let (test, _) = make_blobs(3, 30, 2, 6.0, 400 + seed).unwrap();
            let plan = SplitPlan { fractions: vec![0.5, 0.5], seed: 500 + seed };
            let mut parts = split(&train, &plan).unwrap();
            let sb = parts.pop().unwrap();
            let sa = parts.pop().unwrap();
            let noisy_a = inject_random(&sa.labels, 0.5, 3, 600 + seed).unwrap();
            let config = IliConfig {
                variant: Variant::Oscillating,
                max_iterations: 3,
                early_stopping: EarlyStopping { enabled: false, patience: 1 },
                final_training: true,
                learner: quick_learner(),
                run_seed: 700 + seed,
                ..IliConfig::default()
            };
            let eval = EvalSets {
                x_val: val.features.view(),
                y_val: &val.labels,
                x_test: test.features.view(),
                y_test: &test.labels,
            };
            let result = run_opili(
                &config,
                sa.features.view(),
                &noisy_a.labels,
                sb.features.view(),
                3,
                &eval,
                None,
                None,
            )
            .unwrap();
            let ft = result.final_training.as_ref().unwrap();
            let last = result.history.last().unwrap();
            if ft.record.test_accuracy >= last.test_accuracy - 0.02 {
                holds += 1;
            }
        }
        assert!(holds >= 4, "final training held accuracy in only {holds}/5 seeds");
    }

    #[test]
    fn final_training_rejects_empty_or_unlabelled_subsets() {
        let b = blob_world(2, 20, 4.0);
        let learner = SgdLearner::new(quick_learner());
        let empty = Array2::<f64>::zeros((0, 2));
        let err = final_training(
            &learner,
            1,
            &[b.train.features.view(), empty.view()],
            &b.train.labels,
            2,
            &eval_of(&b),
            None,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        let err = final_training(
            &learner,
            1,
            &[b.train.features.view()],
            &b.train.labels[1..],
            2,
            &eval_of(&b),
            None,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn histories_respect_the_iteration_bound_and_replay_consistently() {
        let b = blob_world(3, 30, 5.0);
        let noisy = inject_random(&b.train.labels, 0.3, 3, 3).unwrap();
        for run_seed in 0..3 {
            let config = IliConfig {
                max_iterations: 4,
                learner: quick_learner(),
                run_seed,
                ..IliConfig::default()
            };
            let result = run_plain(
                &config,
                b.train.features.view(),
                &noisy.labels,
                3,
                &eval_of(&b),
                None,
            )
            .unwrap();
            assert!(result.history.len() <= config.max_iterations + 1);
            match result.stopped_reason {
                StopReason::EarlyStop => {
                    assert!(early_stop_check(&result.history, config.early_stopping.patience));
                    assert!(result.history.len() <= config.max_iterations);
                }
                StopReason::MaxIterations => {
                    assert_eq!(result.history.len(), config.max_iterations + 1);
                    for end in 1..result.history.len() {
                        assert!(!early_stop_check(
                            &result.history[..end],
                            config.early_stopping.patience
                        ));
                    }
                }
            }
            // iteration indices are contiguous from zero
            for (i, rec) in result.history.iter().enumerate() {
                assert_eq!(rec.iteration, i);
            }
        }
    }

    #[test]
    fn noisy_plain_run_improves_labels_on_easy_blobs() {
        let b = blob_world(3, 60, 6.0);
        let noisy = inject_random(&b.train.labels, 0.5, 3, 77).unwrap();
        assert_abs_diff_eq!(
            label_accuracy(&noisy.labels, &b.train.labels).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        let config = IliConfig {
            max_iterations: 5,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            learner: quick_learner(),
            run_seed: 88,
            ..IliConfig::default()
        };
        let result = run_plain(
            &config,
            b.train.features.view(),
            &noisy.labels,
            3,
            &eval_of(&b),
            Some(&b.train.labels),
        )
        .unwrap();
        let final_acc = label_accuracy(&result.final_labels, &b.train.labels).unwrap();
        assert!(final_acc > 0.5, "labels did not improve: {final_acc}");
        assert_eq!(
            result.history.last().unwrap().train_label_accuracy_vs_clean,
            Some(final_acc)
        );
    }
}
