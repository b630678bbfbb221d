//! Fragmentation: label a chain of partitions, each exactly once.
//!
//! A small labelled reference trains the first model, which labels the
//! first unlabelled partition. From then on each round trains a fresh
//! model and labels the next untouched partition, so no partition is ever
//! relabelled. Init mode trains on the newest partition alone; Ref mode
//! keeps the reference in every round, replicated to keep its weight
//! comparable to the growing partition data.

use ili::dataset::{make_blobs, partition, Dataset, PartitionPlan};
use ili::engine::{run_fpili, EarlyStopping, EvalSets, IliConfig, SeedMode, Variant};
use ili::learner::LearnerSpec;

fn main() -> ili::Result<()> {
    let (pool, _) = make_blobs(3, 280, 2, 6.0, 300)?;
    let (val, _) = make_blobs(3, 60, 2, 6.0, 301)?;
    let (test, _) = make_blobs(3, 60, 2, 6.0, 302)?;
    // four chunks: a labelled reference plus three unlabelled partitions
    let chunks = partition(&pool, &PartitionPlan { n_partitions: 4, seed: 23 })?;
    let reference = &chunks[0];
    let partitions: Vec<&Dataset> = chunks[1..].iter().collect();
    println!(
        "reference: {} labelled samples; partitions: {:?} unlabelled",
        reference.len(),
        partitions.iter().map(|p| p.len()).collect::<Vec<_>>()
    );

    let eval = EvalSets {
        x_val: val.features.view(),
        y_val: &val.labels,
        x_test: test.features.view(),
        y_test: &test.labels,
    };
    let views: Vec<_> = partitions.iter().map(|p| p.features.view()).collect();
    let clean: Vec<&[usize]> = partitions.iter().map(|p| p.labels.as_slice()).collect();

    for seed_mode in [SeedMode::Init, SeedMode::Ref { replication_factor: 2.0 }] {
        let config = IliConfig {
            variant: Variant::Fragmentation { n_partitions: partitions.len() },
            seed_mode,
            max_iterations: partitions.len() - 1,
            early_stopping: EarlyStopping { enabled: false, patience: 1 },
            learner: LearnerSpec {
                epochs: 40,
                learning_rate: 0.02,
                momentum: 0.0,
                ..LearnerSpec::default()
            },
            run_seed: 5,
            ..IliConfig::default()
        };
        let result = run_fpili(
            &config,
            reference.features.view(),
            &reference.labels,
            &views,
            pool.num_classes,
            &eval,
            Some(&reference.labels),
            Some(&clean),
        )?;

        println!("\nseed mode {:?}", config.seed_mode);
        println!(
            "{:>4} {:>8} {:>8} {:>10} {:>9}",
            "iter", "val", "test", "label acc", "labelled"
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
        // every iteration labelled exactly one partition, nothing twice
        let labelled: usize = result.history.iter().map(|r| r.replaced_count).sum();
        let total: usize = partitions.iter().map(|p| p.len()).sum();
        println!("labelled {labelled} samples across {total} partition rows");
    }
    Ok(())
}
