//! Seeded batch experiments: TOML scenario configs, parallel execution,
//! CSV and report output, and log-log rate fits.

pub mod config;
pub mod fit;
pub mod output;
pub mod runner;

pub use config::{Check, ExperimentSpec, Extreme, ModelParams, ProblemKind, Scenario};
pub use fit::{fit_loglog, fit_loglog_slope, median, medians_by, LogLogFit};
pub use output::{emit_csv, emit_report, evaluate_checks, parse_csv, read_csv, write_csv, CheckOutcome};
pub use runner::{
    certify_dataset, generate, generate_job, run_experiment, run_experiment_with_threads, solve_dataset, toeplitz_covariance, Dataset, Estimate,
    ResultRow,
};
