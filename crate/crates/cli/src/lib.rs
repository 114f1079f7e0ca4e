//! Library surface of the command-line front end, so the binary stays a
//! thin argument parser and integration tests can drive the full pipeline
//! in-process.

pub mod compare;
pub mod config;
pub mod output;
pub mod runner;

use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable providing the default output directory.
pub const OUT_DIR_ENV: &str = "WAVEFUSE_OUT";

#[derive(Error, Debug)]
pub enum CliError {
    /// Configuration problems: exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Run-time failures: exit code 1.
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// Resolves the output directory: CLI flag, then config field, then the
/// `WAVEFUSE_OUT` environment variable, then `./wavefuse-out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &config::RunConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.output_dir {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("wavefuse-out")
}

/// The `run` subcommand: load config, execute the matrix, write artifacts.
/// Returns the paths written.
pub fn cmd_run(
    config_path: &Path,
    out_flag: Option<&Path>,
    workers: Option<usize>,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>, CliError> {
    let config = config::load_run_config(config_path)?;
    let out_dir = resolve_out_dir(out_flag, &config);
    let outcome = runner::run_experiment(&config, workers, seed_override)?;
    output::write_outputs(&out_dir, &config, &outcome)
}

/// The `compare` subcommand: paired significance report for two curves
/// files on one metric.
pub fn cmd_compare(
    curves_a: &Path,
    curves_b: &Path,
    metric: &str,
) -> Result<compare::ComparisonReport, CliError> {
    compare::compare_files(curves_a, curves_b, metric)
}

/// The `gen-dataset` subcommand: sample a blob spec into a CSV file.
pub fn cmd_gen_dataset(
    spec_path: &Path,
    out_path: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let spec = config::load_blob_spec(spec_path)?;
    let seed = seed_override.unwrap_or(spec.seed);
    let dataset = wavefuse_core::dataset::generate_blobs(&spec.to_spec(), seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    wavefuse_core::dataset::write_csv(&dataset, out_path).map_err(|e| CliError::Run(e.to_string()))
}
