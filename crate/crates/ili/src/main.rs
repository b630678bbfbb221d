//! Command-line front end: run sweeps, train baselines, corrupt label
//! files, and recompute summaries. All logic lives in the library; this
//! file only parses arguments and maps errors to exit codes (1 config,
//! 2 data, 3 numerical failure).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ili::dataset::{read_idx_labels, write_idx_labels};
use ili::experiment::{
    read_iterations_csv, run_baseline_sweep, run_experiment, summarize, write_summary_csv,
    ExperimentConfig, ITERATIONS_FILE, SUMMARY_FILE,
};
use ili::noise::{inject, label_accuracy, NoiseKind, NoiseSpec};
use ili::{Error, Result};

#[derive(Parser)]
#[command(name = "ili", version, about = "Iterative label improvement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Train only the matched baselines of a config's sweep.
    Baseline {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Corrupt an IDX label file and write the result next to it.
    Inject {
        /// IDX label file to corrupt.
        labels: PathBuf,
        /// Fraction of labels to corrupt, in [0,1].
        #[arg(long)]
        fraction: f64,
        /// Noise model.
        #[arg(long, value_enum, default_value_t = KindArg::Random)]
        kind: KindArg,
        /// Bias mapping `source:target`; repeat for several classes.
        #[arg(long)]
        map: Vec<String>,
        /// Seed for the corruption draw.
        #[arg(long)]
        seed: u64,
        /// Number of classes; highest label + 1 when omitted.
        #[arg(long)]
        classes: Option<usize>,
        /// Output path; defaults to the input with `.noisy` appended.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute summary.csv from a run directory's iterations.csv.
    Report {
        /// Directory holding iterations.csv.
        run_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Random,
    Bias,
}

fn parse_map(pairs: &[String]) -> Result<BTreeMap<usize, usize>> {
    let mut map = BTreeMap::new();
    for pair in pairs {
        let (source, target) = pair
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("--map {pair:?}: expected source:target")))?;
        let source: usize = source
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("--map {pair:?}: bad source class")))?;
        let target: usize = target
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("--map {pair:?}: bad target class")))?;
        map.insert(source, target);
    }
    Ok(map)
}

fn cmd_run(config_path: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let summary = run_experiment(&config)?;
    print!("{}", summary.render());
    println!("results in {}", config.output_dir.display());
    Ok(())
}

fn cmd_baseline(config_path: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let rows = run_baseline_sweep(&config)?;
    println!(
        "{:<8} {:<4} {:>10} {:>10} {:>10}",
        "noise", "rep", "val", "test", "labels"
    );
    for row in rows {
        println!(
            "{:<8.2} {:<4} {:>10.4} {:>10.4} {:>10}",
            row.noise_fraction,
            row.repetition,
            row.val_accuracy,
            row.test_accuracy,
            row.label_accuracy_vs_clean
                .map(|v| format!("{v:.4}"))
                .unwrap_or_default(),
        );
    }
    Ok(())
}

fn cmd_inject(
    labels_path: &Path,
    fraction: f64,
    kind: KindArg,
    map: &[String],
    seed: u64,
    classes: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let labels = read_idx_labels(labels_path)?;
    let num_classes = match classes {
        Some(k) => k,
        None => labels.iter().max().map_or(0, |&m| m + 1),
    };
    let kind = match kind {
        KindArg::Random => {
            if !map.is_empty() {
                return Err(Error::Config("--map is only used with --kind bias".into()));
            }
            NoiseKind::Random
        }
        KindArg::Bias => NoiseKind::Bias(parse_map(map)?),
    };
    let spec = NoiseSpec { kind, fraction, seed };
    let noisy = inject(&spec, &labels, num_classes)?;
    let out = out.unwrap_or_else(|| {
        let mut name = labels_path.as_os_str().to_owned();
        name.push(".noisy");
        PathBuf::from(name)
    });
    write_idx_labels(&noisy.labels, &out)?;
    println!(
        "corrupted {} of {} labels (accuracy vs original {:.6}); wrote {}",
        noisy.changed_count(),
        labels.len(),
        label_accuracy(&noisy.labels, &labels)?,
        out.display()
    );
    Ok(())
}

fn cmd_report(run_dir: &Path) -> Result<()> {
    let rows = read_iterations_csv(&run_dir.join(ITERATIONS_FILE))?;
    let summary = summarize(&rows)?;
    write_summary_csv(&run_dir.join(SUMMARY_FILE), &summary)?;
    print!("{}", summary.render());
    println!("rewrote {}", run_dir.join(SUMMARY_FILE).display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Baseline { config } => cmd_baseline(&config),
        Command::Inject { labels, fraction, kind, map, seed, classes, out } => {
            cmd_inject(&labels, fraction, kind, &map, seed, classes, out)
        }
        Command::Report { run_dir } => cmd_report(&run_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version exit cleanly; bad usage is a config error
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
