//! The experiment harness end to end: a noise-fraction sweep from one
//! TOML config to `iterations.csv`, `summary.csv`, and `config.echo`.
//!
//! Every cell of the sweep gets its own derived seeds, and each
//! improvement run is paired with a baseline trained once on the same
//! corrupted labels, so the summary's improvement columns compare like
//! against like. Running this example twice produces byte-identical CSVs.

use ili::experiment::{run_experiment, ExperimentConfig, CONFIG_ECHO_FILE, ITERATIONS_FILE, SUMMARY_FILE};

fn main() -> ili::Result<()> {
    let output_dir = std::env::temp_dir().join(format!("ili-sweep-{}", std::process::id()));
    let text = format!(
        r#"
base_seed = 42
repetitions = 3
output_dir = {output_dir:?}

[dataset]
kind = "blobs"
classes = 3
per_class = 250
dim = 2
separation = 6.0

[split]
train = 0.6
val = 0.2
test = 0.2

[noise]
kind = "random"
fractions = [0.3, 0.5, 0.7]

[ili]
variant = "plain"
max_iterations = 4
early_stopping = false

[ili.filter]
mode = "confidence"

# full-batch descent: convex objective, no mini-batch noise, stable at
# every fraction below the plurality boundary
[ili.learner]
architecture = "softmax"
epochs = 30
batch_size = 1024
learning_rate = 0.05
momentum = 0.0
"#
    );
    let config: ExperimentConfig = toml::from_str(&text).expect("embedded config is valid TOML");
    config.validate()?;

    println!(
        "sweeping {} noise fractions x {} repetitions...",
        config.fractions().len(),
        config.repetitions
    );
    let summary = run_experiment(&config)?;
    print!("{}", summary.render());

    println!("\nartifacts:");
    for name in [ITERATIONS_FILE, SUMMARY_FILE, CONFIG_ECHO_FILE] {
        println!("  {}", output_dir.join(name).display());
    }

    // the echo is the fully resolved config; parsing it back gives exactly
    // the config this run used, defaults and derived seeds included
    let echo = std::fs::read_to_string(output_dir.join(CONFIG_ECHO_FILE))?;
    let reparsed: ExperimentConfig = toml::from_str(&echo).expect("echo is valid TOML");
    assert_eq!(reparsed, config.resolved());
    println!("\nconfig.echo parses back to the resolved configuration");
    Ok(())
}
