//! Sweep execution: data preparation, per-cell noise injection, matched
//! baselines, and the improvement runs themselves.
//!
//! A sweep is a grid of (noise fraction, repetition) cells over one
//! prepared dataset. Each cell derives its own seeds from the base seed,
//! so cells are independent and the whole sweep is reproducible run to
//! run. The baseline of a cell trains once on the same corrupted labels
//! with the same iteration-0 seeds as the improvement run, which makes its
//! accuracies bit-identical to the run's first record.

use ndarray::{concatenate, s, Axis};

use crate::dataset::{
    load_idx, make_blobs, partition, read_csv, seeded_permutation, split, Dataset, PartitionPlan,
    SplitPlan,
};
use crate::engine::{EvalSets, IterationRecord};
use crate::error::{Error, Result};
use crate::learner::{Learner, LearnerModel, SgdLearner};
use crate::noise::{inject, label_accuracy};
use crate::seed::{derive, role};

use super::config::{DatasetKind, ExperimentConfig, VariantConfig};
use super::report::{emit_reports, ReportSummary, Row, BASELINE_VARIANT};

/// The dataset after loading, capping, splitting, and subset layout.
///
/// `train` rows are grouped by subset: the labelled reference first, then
/// each unlabelled partition, with `subset_ends` holding the cumulative
/// boundaries. A plain run has a single subset covering everything.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub subset_ends: Vec<usize>,
}

impl PreparedData {
    /// End of the subset whose labels get corrupted and seeded.
    fn labelled_end(&self) -> usize {
        self.subset_ends[0]
    }
}

fn concat_parts(parts: Vec<Dataset>) -> Result<(Dataset, Vec<usize>)> {
    let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
    let features = concatenate(Axis(0), &views)
        .map_err(|e| Error::Data(format!("assembling subsets: {e}")))?;
    let mut labels = Vec::new();
    let mut ends = Vec::new();
    for part in &parts {
        labels.extend_from_slice(&part.labels);
        ends.push(labels.len());
    }
    let num_classes = parts[0].num_classes;
    Ok((Dataset::new(features, labels, num_classes)?, ends))
}

/// Loads the configured dataset, applies the subset cap, splits off
/// validation and test data, and lays the training pool out for the
/// configured variant. Deterministic given the config.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    let split_seed = config.split_seed();
    let d = &config.dataset;
    let (mut pool, mut external_test) = match d.kind {
        DatasetKind::Blobs => {
            let (data, _) = make_blobs(
                d.classes.unwrap(),
                d.per_class.unwrap(),
                d.dim.unwrap(),
                d.separation.unwrap(),
                derive(config.base_seed, &[role::DATA]),
            )?;
            (data, None)
        }
        DatasetKind::Idx => {
            let pool = load_idx(d.train_images.as_ref().unwrap(), d.train_labels.as_ref().unwrap())?;
            let test = match (&d.test_images, &d.test_labels) {
                (Some(images), Some(labels)) => Some(load_idx(images, labels)?),
                _ => None,
            };
            (pool, test)
        }
        DatasetKind::Csv => {
            let pool = read_csv(d.train.as_ref().unwrap())?;
            let test = d.test.as_ref().map(|p| read_csv(p)).transpose()?;
            (pool, test)
        }
    };
    if let Some(test) = &mut external_test {
        if test.dim() != pool.dim() {
            return Err(Error::Data(format!(
                "test feature dim ({}) does not match training dim ({})",
                test.dim(),
                pool.dim()
            )));
        }
        let k = pool.num_classes.max(test.num_classes);
        pool.num_classes = k;
        test.num_classes = k;
    }
    if let Some(cap) = d.subset_cap {
        if cap < pool.len() {
            let perm = seeded_permutation(pool.len(), derive(split_seed, &[role::CAP]));
            pool = pool.select(&perm[..cap])?;
        }
    }

    let (train, val, test) = if let Some(test) = external_test {
        let plan = SplitPlan { fractions: vec![config.split.train, config.split.val], seed: split_seed };
        let mut parts = split(&pool, &plan)?.into_iter();
        (parts.next().unwrap(), parts.next().unwrap(), test)
    } else {
        let plan = SplitPlan {
            fractions: vec![config.split.train, config.split.val, config.split.test],
            seed: split_seed,
        };
        let mut parts = split(&pool, &plan)?.into_iter();
        (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap())
    };

    let n_subsets = match config.ili.variant {
        VariantConfig::Plain => 1,
        VariantConfig::Opili => 2,
        VariantConfig::Fpili => config.ili.n_partitions.unwrap() + 1,
    };
    let (train, subset_ends) = if n_subsets == 1 {
        let end = train.len();
        (train, vec![end])
    } else {
        let plan = PartitionPlan { n_partitions: n_subsets, seed: derive(split_seed, &[role::PARTITION]) };
        concat_parts(partition(&train, &plan)?)?
    };
    Ok(PreparedData { train, val, test, subset_ends })
}

struct Cell {
    fraction: f64,
    repetition: usize,
    /// Corrupted labels for the labelled subset.
    seed_labels: Vec<usize>,
    /// Validation labels, corrupted only under `noisy_validation`.
    val_labels: Vec<usize>,
    run_seed: u64,
}

fn build_cell(
    config: &ExperimentConfig,
    data: &PreparedData,
    fraction: f64,
    repetition: usize,
    cell_seed: u64,
) -> Result<Cell> {
    let k = data.train.num_classes;
    let noise_seed = config.noise.seed.unwrap_or_else(|| derive(cell_seed, &[role::NOISE]));
    let clean = &data.train.labels[..data.labelled_end()];
    let noisy = inject(&config.noise_spec(fraction, noise_seed)?, clean, k)?;
    let val_labels = if config.noisy_validation {
        let val_seed = derive(cell_seed, &[role::VAL_NOISE]);
        inject(&config.noise_spec(fraction, val_seed)?, &data.val.labels, k)?.labels
    } else {
        data.val.labels.clone()
    };
    Ok(Cell {
        fraction,
        repetition,
        seed_labels: noisy.labels,
        val_labels,
        run_seed: derive(cell_seed, &[role::RUN]),
    })
}

fn eval_sets<'a>(data: &'a PreparedData, cell: &'a Cell) -> EvalSets<'a> {
    EvalSets {
        x_val: data.val.features.view(),
        y_val: &cell.val_labels,
        x_test: data.test.features.view(),
        y_test: &data.test.labels,
    }
}

/// One training on the cell's corrupted labels, sharing the improvement
/// run's iteration-0 seeds. Confidence is measured on its own training
/// inputs; the label accuracy is that of the corrupted labels themselves.
fn baseline_record(
    config: &ExperimentConfig,
    data: &PreparedData,
    cell: &Cell,
) -> Result<(IterationRecord, LearnerModel)> {
    let learner = SgdLearner::new(config.learner_spec());
    let x_lab = data.train.features.slice(s![..data.labelled_end(), ..]);
    let model = learner.train(
        x_lab,
        &cell.seed_labels,
        data.train.num_classes,
        derive(cell.run_seed, &[0, role::INIT_A]),
        derive(cell.run_seed, &[0, role::FIT_A]),
    )?;
    let clean = &data.train.labels[..data.labelled_end()];
    let record = IterationRecord {
        iteration: 0,
        val_accuracy: model.evaluate(data.val.features.view(), &cell.val_labels)?,
        test_accuracy: model.evaluate(data.test.features.view(), &data.test.labels)?,
        train_label_accuracy_vs_clean: Some(label_accuracy(&cell.seed_labels, clean)?),
        replaced_count: 0,
        mean_confidence: model.predict_proba(x_lab)?.mean_confidence(),
    };
    Ok((record, model))
}

fn to_row(variant: &str, cell: &Cell, record: &IterationRecord) -> Row {
    Row {
        variant: variant.to_string(),
        noise_fraction: cell.fraction,
        repetition: cell.repetition,
        iteration: record.iteration,
        val_accuracy: record.val_accuracy,
        test_accuracy: record.test_accuracy,
        label_accuracy_vs_clean: record.train_label_accuracy_vs_clean,
        replaced_count: record.replaced_count,
        mean_confidence: record.mean_confidence,
    }
}

fn run_cell(config: &ExperimentConfig, data: &PreparedData, cell: &Cell) -> Result<Vec<Row>> {
    let k = data.train.num_classes;
    let eval = eval_sets(data, cell);
    let ili_config = config.ili_config(cell.run_seed);
    let (baseline, _) = baseline_record(config, data, cell)?;

    let result = match config.ili.variant {
        VariantConfig::Plain => crate::engine::run_plain(
            &ili_config,
            data.train.features.view(),
            &cell.seed_labels,
            k,
            &eval,
            Some(&data.train.labels),
        )?,
        VariantConfig::Opili => {
            let a_end = data.labelled_end();
            crate::engine::run_opili(
                &ili_config,
                data.train.features.slice(s![..a_end, ..]),
                &cell.seed_labels,
                data.train.features.slice(s![a_end.., ..]),
                k,
                &eval,
                Some(&data.train.labels[..a_end]),
                Some(&data.train.labels[a_end..]),
            )?
        }
        VariantConfig::Fpili => {
            let ends = &data.subset_ends;
            let partitions: Vec<_> = ends
                .windows(2)
                .map(|w| data.train.features.slice(s![w[0]..w[1], ..]))
                .collect();
            let clean_partitions: Vec<&[usize]> =
                ends.windows(2).map(|w| &data.train.labels[w[0]..w[1]]).collect();
            crate::engine::run_fpili(
                &ili_config,
                data.train.features.slice(s![..ends[0], ..]),
                &cell.seed_labels,
                &partitions,
                k,
                &eval,
                Some(&data.train.labels[..ends[0]]),
                Some(&clean_partitions),
            )?
        }
    };

    // the shared seed derivation must keep these two trainings identical
    debug_assert_eq!(baseline.val_accuracy.to_bits(), result.history[0].val_accuracy.to_bits());
    debug_assert_eq!(baseline.test_accuracy.to_bits(), result.history[0].test_accuracy.to_bits());

    let variant = config.variant_name();
    let mut rows = vec![to_row(BASELINE_VARIANT, cell, &baseline)];
    rows.extend(result.history.iter().map(|r| to_row(variant, cell, r)));
    if let Some(ft) = &result.final_training {
        rows.push(to_row(&format!("{variant}+ft"), cell, &ft.record));
    }
    Ok(rows)
}

/// Runs the full sweep described by the config and writes
/// `iterations.csv`, `summary.csv`, and `config.echo` into its output
/// directory. Returns the summary that was written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportSummary> {
    config.validate()?;
    let resolved = config.resolved();
    let data = prepare(&resolved)?;
    let mut rows = Vec::new();
    for (fraction_index, &fraction) in resolved.fractions().iter().enumerate() {
        for rep in 0..resolved.repetitions {
            let cell_seed = derive(resolved.base_seed, &[fraction_index as u64, rep as u64]);
            let cell = build_cell(&resolved, &data, fraction, rep, cell_seed)?;
            rows.extend(run_cell(&resolved, &data, &cell)?);
        }
    }
    let echo = toml::to_string(&resolved)
        .map_err(|e| Error::Config(format!("config echo: {e}")))?;
    emit_reports(&resolved.output_dir, &rows, &echo)
}

/// Trains only the matched baseline for one cell: same data preparation,
/// same corrupted labels, same iteration-0 seeds as the improvement run
/// that `cell_seed` would produce inside a sweep.
pub fn run_baseline(
    config: &ExperimentConfig,
    fraction: f64,
    cell_seed: u64,
) -> Result<IterationRecord> {
    config.validate()?;
    if !(0.0..=1.0).contains(&fraction) || !fraction.is_finite() {
        return Err(Error::Config(format!("noise fraction {fraction} outside [0,1]")));
    }
    let resolved = config.resolved();
    let data = prepare(&resolved)?;
    let cell = build_cell(&resolved, &data, fraction, 0, cell_seed)?;
    Ok(baseline_record(&resolved, &data, &cell)?.0)
}

/// The cell seed used by sweep position (fraction index, repetition).
pub fn cell_seed(base_seed: u64, fraction_index: usize, repetition: usize) -> u64 {
    derive(base_seed, &[fraction_index as u64, repetition as u64])
}

/// Trains only the matched baseline of every sweep cell, sharing one data
/// preparation. Produces the same rows a full run files under the
/// `baseline` variant.
pub fn run_baseline_sweep(config: &ExperimentConfig) -> Result<Vec<Row>> {
    config.validate()?;
    let resolved = config.resolved();
    let data = prepare(&resolved)?;
    let mut rows = Vec::new();
    for (fraction_index, &fraction) in resolved.fractions().iter().enumerate() {
        for rep in 0..resolved.repetitions {
            let seed = cell_seed(resolved.base_seed, fraction_index, rep);
            let cell = build_cell(&resolved, &data, fraction, rep, seed)?;
            let (record, _) = baseline_record(&resolved, &data, &cell)?;
            rows.push(to_row(BASELINE_VARIANT, &cell, &record));
        }
    }
    Ok(rows)
}

#[cfg(test)]
impl ExperimentConfig {
    fn clone_with_output(&self, dir: &std::path::Path) -> ExperimentConfig {
        let mut c = self.clone();
        c.output_dir = dir.to_path_buf();
        c
    }
}
