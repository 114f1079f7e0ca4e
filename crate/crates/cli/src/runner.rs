//! Experiment-matrix execution: (method × seed × fold) runs, in parallel,
//! merged deterministically.

use crate::config::RunConfig;
use crate::CliError;
use rayon::prelude::*;
use wavefuse_core::dataset::{
    generate_blobs, load_csv, stratified_folds, stratified_split, Dataset,
};
use wavefuse_core::harness::{run_active_learning, Method, Metric, RunOptions, RunResult};
use wavefuse_core::seeds;

/// Seed salt separating fold-level run streams.
const SALT_RUN: u64 = 0x1e;
/// Fixed seed for split/fold construction so every method and seed sees
/// the same partition (paired comparisons need this).
const SPLIT_SEED: u64 = 0;

/// One completed run tagged with its matrix coordinates.
#[derive(Debug, Clone)]
pub struct TaggedRun {
    pub method: String,
    pub seed: u64,
    pub fold: usize,
    pub result: RunResult,
}

/// Everything an experiment produced, before serialization.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<TaggedRun>,
    pub label_mapping: Option<Vec<i64>>,
    pub seeds: Vec<u64>,
    pub folds: usize,
}

fn build_dataset(config: &RunConfig) -> Result<(Dataset, Option<Vec<i64>>), CliError> {
    match config.dataset.source.as_str() {
        "blobs" => {
            let blobs = config.dataset.blobs.as_ref().expect("validated");
            let dataset = generate_blobs(&blobs.to_spec(), blobs.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok((dataset, None))
        }
        "csv" => {
            let path = config.dataset.path.as_ref().expect("validated");
            let loaded = load_csv(path).map_err(|e| CliError::Config(e.to_string()))?;
            Ok((loaded.dataset, Some(loaded.original_labels)))
        }
        _ => unreachable!("validated"),
    }
}

/// Runs the whole matrix. `workers` bounds the rayon pool; results come
/// back sorted by (method, seed, fold) regardless of completion order.
pub fn run_experiment(
    config: &RunConfig,
    workers: Option<usize>,
    seed_override: Option<u64>,
) -> Result<ExperimentOutcome, CliError> {
    crate::config::validate(config)?;
    let (dataset, label_mapping) = build_dataset(config)?;

    let seeds: Vec<u64> = match seed_override {
        Some(s) => vec![s],
        None => config.loop_section.seeds.clone(),
    };
    let folds = config.loop_section.folds;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = if folds == 1 {
        vec![
            stratified_split(&dataset, config.dataset.split_fraction, SPLIT_SEED)
                .map_err(|e| CliError::Config(e.to_string()))?,
        ]
    } else {
        stratified_folds(&dataset, folds, SPLIT_SEED)
            .map_err(|e| CliError::Config(e.to_string()))?
    };

    let metric = Metric::parse(&config.metric).map_err(|e| CliError::Config(e.to_string()))?;
    let options = RunOptions {
        loop_config: config.loop_section.to_loop_config(config.model.mc_passes),
        train_config: config.model.to_train_config(),
        controller_config: config
            .controller
            .to_controller_config(config.loop_section.rounds),
        metric,
    };

    let mut jobs: Vec<(Method, u64, usize)> = Vec::new();
    for method_name in &config.methods {
        let method = Method::parse(method_name).map_err(|e| CliError::Config(e.to_string()))?;
        for &seed in &seeds {
            for fold in 0..splits.len() {
                jobs.push((method.clone(), seed, fold));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;

    let mut runs: Vec<TaggedRun> = pool.install(|| {
        jobs.par_iter()
            .map(|(method, seed, fold)| {
                let (train_idx, test_idx) = &splits[*fold];
                let run_seed = if splits.len() == 1 {
                    *seed
                } else {
                    seeds::derive2(*seed, SALT_RUN, *fold as u64)
                };
                run_active_learning(&dataset, train_idx, test_idx, method, &options, run_seed)
                    .map(|mut result| {
                        // report the configured seed, not the fold-mixed one
                        result.seed = *seed;
                        TaggedRun {
                            method: method.name(),
                            seed: *seed,
                            fold: *fold,
                            result,
                        }
                    })
                    .map_err(|e| {
                        CliError::Run(format!("{} seed {seed} fold {fold}: {e}", method.name()))
                    })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    runs.sort_by(|a, b| (&a.method, a.seed, a.fold).cmp(&(&b.method, b.seed, b.fold)));
    Ok(ExperimentOutcome {
        runs,
        label_mapping,
        seeds,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> RunConfig {
        toml::from_str(
            r#"
methods = ["random", "entropy"]

[dataset]
source = "blobs"

[dataset.blobs]
seed = 1

[[dataset.blobs.classes]]
center = [0.0, 0.0]
stdev = 0.5
count = 30

[[dataset.blobs.classes]]
center = [3.0, 3.0]
stdev = 0.5
count = 30

[model]
hidden_dim = 8
epochs = 10
mc_passes = 3

[loop]
rounds = 2
budget = 4
init_size = 4
seeds = [1, 2]
"#,
        )
        .unwrap()
    }

    #[test]
    fn matrix_runs_sorted_and_deterministic() {
        let config = minimal_config();
        let a = run_experiment(&config, Some(2), None).unwrap();
        let b = run_experiment(&config, Some(1), None).unwrap();
        assert_eq!(a.runs.len(), 4);
        let coords: Vec<(String, u64, usize)> = a
            .runs
            .iter()
            .map(|r| (r.method.clone(), r.seed, r.fold))
            .collect();
        assert_eq!(
            coords,
            vec![
                ("entropy".into(), 1, 0),
                ("entropy".into(), 2, 0),
                ("random".into(), 1, 0),
                ("random".into(), 2, 0),
            ]
        );
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.result, rb.result);
        }
    }

    #[test]
    fn seed_override_replaces_seed_list() {
        let config = minimal_config();
        let outcome = run_experiment(&config, Some(1), Some(99)).unwrap();
        assert_eq!(outcome.runs.len(), 2);
        assert!(outcome.runs.iter().all(|r| r.seed == 99));
    }

    #[test]
    fn folds_multiply_runs() {
        let mut config = minimal_config();
        config.loop_section.folds = 3;
        config.methods = vec!["random".into()];
        let outcome = run_experiment(&config, Some(2), None).unwrap();
        assert_eq!(outcome.runs.len(), 6); // 1 method x 2 seeds x 3 folds
                                           // different folds see different test splits, so results differ
        assert_ne!(outcome.runs[0].result, outcome.runs[1].result);
    }
}
