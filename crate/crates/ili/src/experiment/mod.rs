//! Noise-robustness experiment harness.
//!
//! Everything here turns a single TOML file into a reproducible sweep:
//! [`config`] declares the grid, [`runner`] executes it cell by cell, and
//! [`report`] writes the per-iteration CSV, the aggregated summary, and a
//! resolved copy of the configuration next to them.

pub mod config;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use report::{
    emit_reports, read_iterations_csv, summarize, write_iterations_csv, write_summary_csv,
    FailureRegime, ReportSummary, Row, SummaryRow, BASELINE_VARIANT, CONFIG_ECHO_FILE,
    ITERATIONS_FILE, SUMMARY_FILE,
};
pub use runner::{
    cell_seed, prepare, run_baseline, run_baseline_sweep, run_experiment, PreparedData,
};
