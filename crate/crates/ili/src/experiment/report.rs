//! Run artifacts: per-iteration CSV, summary CSV, and the config echo.
//!
//! Every float is written with six decimal places and absent optionals as
//! empty fields, so reruns of the same config produce byte-identical files.
//! Summaries are always computed from rows as they appear in
//! `iterations.csv` (the runner reads its own file back), which makes
//! `summary.csv` exactly reproducible from `iterations.csv` alone.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_ECHO_FILE: &str = "config.echo";

const ITERATIONS_HEADER: [&str; 9] = [
    "variant",
    "noise_fraction",
    "repetition",
    "iteration",
    "val_accuracy",
    "test_accuracy",
    "label_accuracy_vs_clean",
    "replaced_count",
    "mean_confidence",
];

const SUMMARY_HEADER: [&str; 8] = [
    "noise_fraction",
    "variant",
    "baseline_mean",
    "baseline_sigma",
    "final_mean",
    "final_sigma",
    "rel_improvement_pct",
    "abs_improvement_pp",
];

/// The variant name used for the matched single-training rows.
pub const BASELINE_VARIANT: &str = "baseline";

/// One line of `iterations.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub variant: String,
    pub noise_fraction: f64,
    pub repetition: usize,
    pub iteration: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub label_accuracy_vs_clean: Option<f64>,
    pub replaced_count: usize,
    pub mean_confidence: f64,
}

/// One line of `summary.csv`: a (noise fraction, variant) pair aggregated
/// over repetitions and compared against its matched baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub noise_fraction: f64,
    pub variant: String,
    pub baseline_mean: f64,
    pub baseline_sigma: Option<f64>,
    pub final_mean: f64,
    pub final_sigma: Option<f64>,
    pub rel_improvement_pct: f64,
    pub abs_improvement_pp: f64,
}

/// A cell where the matched baseline did no better than the corrupted
/// labels it was trained on; iterating from such a start is hopeless.
#[derive(Clone, Debug, PartialEq)]
pub struct FailureRegime {
    pub noise_fraction: f64,
    pub variant: String,
    pub baseline_accuracy: f64,
    pub label_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub rows: Vec<SummaryRow>,
    pub failure_regimes: Vec<FailureRegime>,
}

fn float(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub fn write_iterations_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(ITERATIONS_HEADER)?;
    for row in rows {
        writer.write_record([
            row.variant.as_str(),
            &float(row.noise_fraction),
            &row.repetition.to_string(),
            &row.iteration.to_string(),
            &float(row.val_accuracy),
            &float(row.test_accuracy),
            &opt_float(row.label_accuracy_vs_clean),
            &row.replaced_count.to_string(),
            &float(row.mean_confidence),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, line: u64) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Data(format!("iterations.csv line {line}: missing field {idx}")))?;
    raw.parse().map_err(|_| {
        Error::Data(format!(
            "iterations.csv line {line}: cannot parse {raw:?} as {}",
            ITERATIONS_HEADER[idx]
        ))
    })
}

pub fn read_iterations_csv(path: &Path) -> Result<Vec<Row>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(ITERATIONS_HEADER) {
        return Err(Error::Data(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let label_acc = match record.get(6) {
            Some("") | None => None,
            Some(raw) => Some(raw.parse().map_err(|_| {
                Error::Data(format!("iterations.csv line {line}: cannot parse {raw:?}"))
            })?),
        };
        rows.push(Row {
            variant: record.get(0).unwrap_or_default().to_string(),
            noise_fraction: parse_field(&record, 1, line)?,
            repetition: parse_field(&record, 2, line)?,
            iteration: parse_field(&record, 3, line)?,
            val_accuracy: parse_field(&record, 4, line)?,
            test_accuracy: parse_field(&record, 5, line)?,
            label_accuracy_vs_clean: label_acc,
            replaced_count: parse_field(&record, 7, line)?,
            mean_confidence: parse_field(&record, 8, line)?,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv(path: &Path, summary: &ReportSummary) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(SUMMARY_HEADER)?;
    for row in &summary.rows {
        writer.write_record([
            float(row.noise_fraction).as_str(),
            &row.variant,
            &float(row.baseline_mean),
            &opt_float(row.baseline_sigma),
            &float(row.final_mean),
            &opt_float(row.final_sigma),
            &float(row.rel_improvement_pct),
            &float(row.abs_improvement_pp),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample standard deviation; absent for fewer than two values.
fn sigma(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Aggregates iteration rows into one summary row per (fraction, variant)
/// pair, comparing each variant's final test accuracy against the matched
/// baseline at the same fraction. Cells whose baseline did not beat its own
/// training-label accuracy are flagged as failure regimes.
pub fn summarize(rows: &[Row]) -> Result<ReportSummary> {
    // keys order by fraction bits, which matches value order for the
    // non-negative finite fractions a config can hold
    let mut baselines: BTreeMap<u64, Vec<&Row>> = BTreeMap::new();
    let mut variants: BTreeMap<(u64, String), BTreeMap<usize, Vec<&Row>>> = BTreeMap::new();
    for row in rows {
        let bits = row.noise_fraction.to_bits();
        if row.variant == BASELINE_VARIANT {
            baselines.entry(bits).or_default().push(row);
        } else {
            variants
                .entry((bits, row.variant.clone()))
                .or_default()
                .entry(row.repetition)
                .or_default()
                .push(row);
        }
    }

    let mut summary_rows = Vec::new();
    let mut failure_regimes = Vec::new();
    for ((bits, variant), reps) in &variants {
        let fraction = f64::from_bits(*bits);
        let base_rows = baselines.get(bits).ok_or_else(|| {
            Error::Data(format!("no baseline rows at noise fraction {fraction}"))
        })?;
        let base_accs: Vec<f64> = base_rows.iter().map(|r| r.test_accuracy).collect();
        let finals: Vec<f64> = reps
            .values()
            .map(|rows| {
                rows.iter()
                    .max_by_key(|r| r.iteration)
                    .map(|r| r.test_accuracy)
                    .expect("repetition groups are never empty")
            })
            .collect();
        let baseline_mean = mean(&base_accs);
        let final_mean = mean(&finals);
        if baseline_mean == 0.0 {
            return Err(Error::Data(format!(
                "baseline mean accuracy is zero at noise fraction {fraction}; relative improvement is undefined"
            )));
        }
        summary_rows.push(SummaryRow {
            noise_fraction: fraction,
            variant: variant.clone(),
            baseline_mean,
            baseline_sigma: sigma(&base_accs),
            final_mean,
            final_sigma: sigma(&finals),
            rel_improvement_pct: 100.0 * (final_mean - baseline_mean) / baseline_mean,
            abs_improvement_pp: 100.0 * (final_mean - baseline_mean),
        });
        let label_accs: Vec<f64> = base_rows
            .iter()
            .filter_map(|r| r.label_accuracy_vs_clean)
            .collect();
        if label_accs.len() == base_rows.len() {
            let label_accuracy = mean(&label_accs);
            if baseline_mean <= label_accuracy {
                failure_regimes.push(FailureRegime {
                    noise_fraction: fraction,
                    variant: variant.clone(),
                    baseline_accuracy: baseline_mean,
                    label_accuracy,
                });
            }
        }
    }
    Ok(ReportSummary { rows: summary_rows, failure_regimes })
}

impl ReportSummary {
    /// Plain-text rendering for terminal output.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:<12} {:>13} {:>13} {:>10} {:>10}\n",
            "noise", "variant", "baseline", "final", "rel %", "abs pp"
        ));
        for row in &self.rows {
            let fmt_pm = |m: f64, s: Option<f64>| match s {
                Some(s) => format!("{m:.4}±{s:.4}"),
                None => format!("{m:.4}"),
            };
            out.push_str(&format!(
                "{:<8.2} {:<12} {:>13} {:>13} {:>10.2} {:>10.2}\n",
                row.noise_fraction,
                row.variant,
                fmt_pm(row.baseline_mean, row.baseline_sigma),
                fmt_pm(row.final_mean, row.final_sigma),
                row.rel_improvement_pct,
                row.abs_improvement_pp,
            ));
        }
        for flag in &self.failure_regimes {
            out.push_str(&format!(
                "warning: failure regime at noise fraction {:.2} ({}): baseline accuracy {:.4} <= label accuracy {:.4}\n",
                flag.noise_fraction, flag.variant, flag.baseline_accuracy, flag.label_accuracy,
            ));
        }
        out
    }
}

/// Writes `iterations.csv`, `summary.csv`, and `config.echo` into `dir`,
/// then returns the summary. The summary is computed from the freshly
/// written iterations file so that recomputing it later from that file
/// reproduces `summary.csv` byte for byte.
pub fn emit_reports(dir: &Path, rows: &[Row], config_echo: &str) -> Result<ReportSummary> {
    std::fs::create_dir_all(dir)?;
    let iterations_path = dir.join(ITERATIONS_FILE);
    write_iterations_csv(&iterations_path, rows)?;
    let summary = summarize(&read_iterations_csv(&iterations_path)?)?;
    write_summary_csv(&dir.join(SUMMARY_FILE), &summary)?;
    let mut echo = std::fs::File::create(dir.join(CONFIG_ECHO_FILE))?;
    echo.write_all(config_echo.as_bytes())?;
    Ok(summary)
}
