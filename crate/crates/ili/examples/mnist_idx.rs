//! The improvement loop on real MNIST digits from IDX files.
//!
//! Looks for the four standard files under `$ILI_MNIST_DIR` or
//! `data/mnist/` in the repository root and exits gracefully when they are
//! missing. Runs at desk scale: a 3,000-image training subset, 60% random
//! label noise, and a small MLP retrained from scratch each round.

use std::path::PathBuf;

use ili::dataset::{load_idx, seeded_permutation, split, SplitPlan};
use ili::engine::{run_plain, EarlyStopping, EvalSets, IliConfig};
use ili::learner::{Architecture, LearnerSpec};
use ili::noise::inject_random;
use ili::seed::{derive, role};

fn mnist_dir() -> PathBuf {
    match std::env::var_os("ILI_MNIST_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"),
    }
}

fn main() -> ili::Result<()> {
    let dir = mnist_dir();
    let files = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ];
    if !files.iter().all(|f| dir.join(f).exists()) {
        println!("MNIST files not found under {}", dir.display());
        println!("expected: {}", files.join(", "));
        println!("set ILI_MNIST_DIR or place the standard IDX files there, then rerun");
        return Ok(());
    }

    println!("loading MNIST from {}", dir.display());
    let pool = load_idx(&dir.join(files[0]), &dir.join(files[1]))?;
    let test_full = load_idx(&dir.join(files[2]), &dir.join(files[3]))?;

    // cap to desk scale: 3,000 train + 750 val from the train file
    let base_seed = 77;
    let cap = 3_750;
    let perm = seeded_permutation(pool.len(), derive(base_seed, &[role::CAP]));
    let capped = pool.select(&perm[..cap])?;
    let plan = SplitPlan { fractions: vec![0.8, 0.2], seed: derive(base_seed, &[role::SPLIT]) };
    let mut parts = split(&capped, &plan)?.into_iter();
    let (train, val) = (parts.next().unwrap(), parts.next().unwrap());
    let test_perm = seeded_permutation(test_full.len(), derive(base_seed, &[role::DATA]));
    let test = test_full.select(&test_perm[..2_000])?;
    println!("train {} / val {} / test {}", train.len(), val.len(), test.len());

    let noisy = inject_random(&train.labels, 0.6, train.num_classes, derive(base_seed, &[role::NOISE]))?;
    println!("corrupted {} of {} training labels", noisy.changed_count(), train.len());

    let eval = EvalSets {
        x_val: val.features.view(),
        y_val: &val.labels,
        x_test: test.features.view(),
        y_test: &test.labels,
    };
    let config = IliConfig {
        max_iterations: 5,
        early_stopping: EarlyStopping { enabled: false, patience: 1 },
        learner: LearnerSpec {
            architecture: Architecture::Mlp { hidden_units: 64 },
            epochs: 6,
            batch_size: 64,
            learning_rate: 0.1,
            momentum: 0.9,
            ..LearnerSpec::default()
        },
        run_seed: derive(base_seed, &[role::RUN]),
        ..IliConfig::default()
    };
    println!("running 6 trainings of an MLP(64); this takes a minute or so");
    let result = run_plain(
        &config,
        train.features.view(),
        &noisy.labels,
        train.num_classes,
        &eval,
        Some(&train.labels),
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
    println!("stopped: {:?}", result.stopped_reason);
    Ok(())
}
