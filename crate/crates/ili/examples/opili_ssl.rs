//! Semi-supervised labelling with two oscillating models.
//!
//! Subset A has (noisy) labels, subset B has none at all. Model A labels
//! B, a fresh model B trains on those labels and relabels A, and so on.
//! B's clean labels exist here only to grade the outcome at the end; the
//! loop itself never receives them, which is what makes this usable when
//! half the data is genuinely unlabelled.

use ili::dataset::{make_blobs, partition, PartitionPlan};
use ili::engine::{run_opili, EarlyStopping, EvalSets, IliConfig, Variant};
use ili::learner::LearnerSpec;
use ili::noise::{inject_random, label_accuracy};

fn main() -> ili::Result<()> {
    let (pool, _) = make_blobs(3, 240, 2, 6.0, 200)?;
    let (val, _) = make_blobs(3, 60, 2, 6.0, 201)?;
    let (test, _) = make_blobs(3, 60, 2, 6.0, 202)?;
    let halves = partition(&pool, &PartitionPlan { n_partitions: 2, seed: 17 })?;
    let (a, b) = (&halves[0], &halves[1]);

    let noisy_a = inject_random(&a.labels, 0.3, pool.num_classes, 7)?;
    println!(
        "A: {} samples, {} labels corrupted; B: {} samples, unlabelled",
        a.len(),
        noisy_a.changed_count(),
        b.len()
    );

    let eval = EvalSets {
        x_val: val.features.view(),
        y_val: &val.labels,
        x_test: test.features.view(),
        y_test: &test.labels,
    };
    let config = IliConfig {
        variant: Variant::Oscillating,
        max_iterations: 4,
        early_stopping: EarlyStopping { enabled: false, patience: 1 },
        learner: LearnerSpec {
            epochs: 40,
            learning_rate: 0.02,
            momentum: 0.0,
            ..LearnerSpec::default()
        },
        run_seed: 3,
        ..IliConfig::default()
    };
    let result = run_opili(
        &config,
        a.features.view(),
        &noisy_a.labels,
        b.features.view(),
        pool.num_classes,
        &eval,
        Some(&a.labels),
        Some(&b.labels),
    )?;

    println!(
        "{:>4} {:>8} {:>8} {:>10} {:>9}",
        "iter", "val", "test", "label acc", "replaced"
    );
    for r in &result.history {
        println!(
            "{:>4} {:>8.4} {:>8.4} {:>10.4} {:>9}",
            r.iteration,
            r.val_accuracy,
            r.test_accuracy,
            r.train_label_accuracy_vs_clean.unwrap_or(f64::NAN),
            r.replaced_count
        );
    }

    // final labels cover A then B, in their input row order
    let b_labels = &result.final_labels[a.len()..];
    println!(
        "accuracy of A's repaired labels: {:.4} (started at {:.4})",
        label_accuracy(&result.final_labels[..a.len()], &a.labels)?,
        label_accuracy(&noisy_a.labels, &a.labels)?,
    );
    println!(
        "accuracy of B's inferred labels: {:.4} (B was never labelled)",
        label_accuracy(b_labels, &b.labels)?
    );
    Ok(())
}
