//! Deterministic serialization of run artifacts.
//!
//! Three CSV files plus a JSON manifest per `run` invocation:
//! - `curves.csv`   — one row per (method, seed, fold, round); the row at
//!   `round = rounds + 1` is the post-loop evaluation of the final
//!   labeled set.
//! - `weights.csv`  — per-strategy controller state per round, including
//!   an `exploration` row, for fused/alternating methods.
//! - `summary.csv`  — per-method mean/std across runs.
//! - `manifest.json` — config echo, seeds, version, label remapping.
//!
//! Floats are fixed at 9 significant digits and rows are fully ordered, so
//! reruns are byte-identical.

use crate::config::RunConfig;
use crate::runner::ExperimentOutcome;
use crate::CliError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use wavefuse_core::harness::{aggregate_runs, RunResult};

/// 9 significant digits, scientific; deterministic across platforms.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn curves_csv(runs: &[(String, u64, usize, &RunResult)]) -> String {
    let mut out = String::from("method,seed,fold,round,n_labeled,metric,value\n");
    for (method, seed, fold, result) in runs {
        for record in &result.records {
            let _ = writeln!(
                out,
                "{method},{seed},{fold},{},{},{},{}",
                record.round,
                record.n_labeled,
                result.metric_name,
                fmt_float(record.metric_value)
            );
        }
        // final post-loop evaluation
        let final_round = result.records.last().map(|r| r.round).unwrap_or(0) + 1;
        let n_labeled = result.records.last().map(|r| r.n_labeled).unwrap_or(0);
        let _ = writeln!(
            out,
            "{method},{seed},{fold},{final_round},{n_labeled},{},{}",
            result.metric_name,
            fmt_float(result.final_metric)
        );
    }
    out
}

pub fn weights_csv(runs: &[(String, u64, usize, &RunResult)]) -> String {
    let mut out = String::from("method,seed,fold,round,strategy,psi,omega,weight,quota\n");
    for (method, seed, fold, result) in runs {
        for record in &result.records {
            let Some(ctrl) = &record.controller else {
                continue;
            };
            for (i, name) in ctrl.strategy_names.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{method},{seed},{fold},{},{name},{},{},{},{}",
                    record.round,
                    fmt_float(ctrl.psi[i]),
                    fmt_float(ctrl.omega[i]),
                    fmt_float(ctrl.weights[i]),
                    ctrl.quotas[i]
                );
            }
            let _ = writeln!(
                out,
                "{method},{seed},{fold},{},exploration,{},{},{},{}",
                record.round,
                fmt_float(0.0),
                fmt_float(0.0),
                fmt_float(0.0),
                ctrl.exploration
            );
        }
    }
    out
}

pub fn summary_csv(results: &[RunResult]) -> Result<String, CliError> {
    let rows = aggregate_runs(results).map_err(|e| CliError::Run(e.to_string()))?;
    let mut out = String::from("method,round,metric,mean,std,n_runs\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.method,
            row.round,
            row.metric_name,
            fmt_float(row.mean),
            fmt_float(row.std),
            row.n_runs
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config: &'a RunConfig,
    seeds: &'a [u64],
    folds: usize,
    split_seed: u64,
    label_mapping: Option<&'a [i64]>,
    files: [&'a str; 3],
}

pub fn manifest_json(config: &RunConfig, outcome: &ExperimentOutcome) -> Result<String, CliError> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config,
        seeds: &outcome.seeds,
        folds: outcome.folds,
        split_seed: 0,
        label_mapping: outcome.label_mapping.as_deref(),
        files: ["curves.csv", "weights.csv", "summary.csv"],
    };
    serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Run(e.to_string()))
}

/// Writes all four artifacts. Any failure removes files already written
/// in this invocation.
pub fn write_outputs(
    out_dir: &Path,
    config: &RunConfig,
    outcome: &ExperimentOutcome,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", out_dir.display())))?;
    let tagged: Vec<(String, u64, usize, &RunResult)> = outcome
        .runs
        .iter()
        .map(|r| (r.method.clone(), r.seed, r.fold, &r.result))
        .collect();
    let results: Vec<RunResult> = outcome.runs.iter().map(|r| r.result.clone()).collect();

    let contents = [
        ("curves.csv", curves_csv(&tagged)),
        ("weights.csv", weights_csv(&tagged)),
        ("summary.csv", summary_csv(&results)?),
        ("manifest.json", manifest_json(config, outcome)?),
    ];

    let mut written = Vec::new();
    for (name, text) in contents {
        let path = out_dir.join(name);
        if let Err(e) = std::fs::write(&path, text) {
            for earlier in &written {
                let _ = std::fs::remove_file(earlier);
            }
            return Err(CliError::Run(format!(
                "cannot write {}: {e}",
                path.display()
            )));
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_nine_significant_digits() {
        assert_eq!(fmt_float(0.5), "5.00000000e-1");
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_float(0.0), "0.00000000e0");
        let parsed: f64 = fmt_float(0.123456789123).parse().unwrap();
        assert!((parsed - 0.123456789123).abs() < 1e-9);
    }
}
