//! What the confidence gate accepts and rejects during relabelling.
//!
//! A deliberately under-trained classifier predicts labels for points near
//! and far from the class boundary. The gate takes a prediction only when
//! its winning probability clears the threshold strictly; otherwise the
//! sample keeps its previous label. Threshold 0 still skips exact ties,
//! which is why its counts differ from the unfiltered rule even when the
//! resulting labels match.

use ili::dataset::make_blobs;
use ili::filter::{apply_filter, FilterSpec, DEFAULT_CONFIDENCE_THRESHOLD};
use ili::learner::{Learner, LearnerSpec, SgdLearner};
use ili::noise::inject_random;

fn main() -> ili::Result<()> {
    // separation 2 keeps plenty of low-confidence points near the boundary
    let (train, _) = make_blobs(3, 80, 2, 2.0, 400)?;
    let noisy = inject_random(&train.labels, 0.4, train.num_classes, 11)?;

    let learner = SgdLearner::new(LearnerSpec {
        epochs: 8,
        learning_rate: 0.02,
        momentum: 0.0,
        ..LearnerSpec::default()
    });
    let model = learner.train(train.features.view(), &noisy.labels, train.num_classes, 1, 2)?;
    let predictions = learner.predict(&model, train.features.view())?;

    let threshold = DEFAULT_CONFIDENCE_THRESHOLD;
    let spec = FilterSpec::Confidence { threshold };
    let outcome = apply_filter(&spec, &predictions, &noisy.labels)?;

    println!("threshold {threshold}: first ten samples");
    println!(
        "{:>3} {:>5} {:>5} {:>6} {:>6}",
        "idx", "prev", "pred", "conf", "taken"
    );
    for i in 0..10 {
        println!(
            "{:>3} {:>5} {:>5} {:>6.3} {:>6}",
            i,
            noisy.labels[i],
            predictions.predicted[i],
            predictions.confidence[i],
            if outcome.took_prediction[i] { "yes" } else { "no" }
        );
    }
    println!(
        "replaced {} labels, kept {} (of {})",
        outcome.replaced_count,
        outcome.kept_count,
        train.len()
    );

    println!("\nsweeping the threshold over the same predictions:");
    println!("{:>9} {:>9} {:>6}", "threshold", "replaced", "kept");
    for threshold in [0.0, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let outcome = apply_filter(
            &FilterSpec::Confidence { threshold },
            &predictions,
            &noisy.labels,
        )?;
        println!("{:>9.1} {:>9} {:>6}", threshold, outcome.replaced_count, outcome.kept_count);
    }

    let unfiltered = apply_filter(&FilterSpec::Unfiltered, &predictions, &noisy.labels)?;
    println!(
        "\nunfiltered: every prediction taken, {} of them actually changed a label",
        unfiltered.replaced_count
    );
    Ok(())
}
