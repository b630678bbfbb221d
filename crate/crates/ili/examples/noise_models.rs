//! The two corruption models, with exact counts.
//!
//! Random noise picks round(fraction * N) samples and gives each a
//! different label drawn uniformly from the other classes. Bias noise
//! touches only the classes named in its mapping and sends a rounded
//! fraction of each source class to its fixed target, which is how
//! systematic confusions such as "4 becomes 7" are modelled.

use std::collections::BTreeMap;

use ili::noise::{inject_bias, inject_random, label_accuracy};

fn class_counts(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

fn main() -> ili::Result<()> {
    let num_classes = 10;
    let labels: Vec<usize> = (0..1000).map(|i| i % num_classes).collect();
    println!("clean counts:  {:?}", class_counts(&labels, num_classes));

    let random = inject_random(&labels, 0.3, num_classes, 42)?;
    println!("\nrandom noise, fraction 0.3:");
    println!("noisy counts:  {:?}", class_counts(&random.labels, num_classes));
    println!(
        "changed {} labels (exactly round(0.3 * 1000)), accuracy {:.3}",
        random.changed_count(),
        label_accuracy(&random.labels, &labels)?
    );
    // changed_mask marks exactly the corrupted positions
    let marked = random.changed_mask.iter().filter(|&&m| m).count();
    assert_eq!(marked, random.changed_count());

    let mapping = BTreeMap::from([(4, 7), (9, 1)]);
    let biased = inject_bias(&labels, &mapping, 0.5, num_classes, 42)?;
    println!("\nbias noise {{4->7, 9->1}}, fraction 0.5:");
    println!("noisy counts:  {:?}", class_counts(&biased.labels, num_classes));
    println!(
        "changed {} labels: half of each mapped class, no other class touched",
        biased.changed_count()
    );

    let all = inject_bias(&labels, &mapping, 1.0, num_classes, 42)?;
    println!("\nsame mapping at fraction 1.0:");
    println!("noisy counts:  {:?}", class_counts(&all.labels, num_classes));
    println!("no 4s or 9s remain; every one became its mapped target");

    // the same seed always produces the same corruption
    let again = inject_random(&labels, 0.3, num_classes, 42)?;
    assert_eq!(again.labels, random.labels);
    println!("\nrepeating with the same seed reproduces identical noisy labels");
    Ok(())
}
