//! Run configuration: TOML schema, validation, and conversion into the
//! core types. Unknown keys are rejected so typos fail loudly before any
//! run starts.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use wavefuse_core::controller::ControllerConfig;
use wavefuse_core::dataset::{BlobClass, BlobSpec};
use wavefuse_core::harness::{LoopConfig, Method, Metric};
use wavefuse_core::learner::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(rename = "loop")]
    pub loop_section: LoopSection,
    pub methods: Vec<String>,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_metric() -> String {
    "accuracy".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// "blobs" or "csv".
    pub source: String,
    /// CSV path (source = "csv").
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Train fraction for the single-split regime (folds = 1).
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    /// Blob generator (source = "blobs").
    #[serde(default)]
    pub blobs: Option<BlobsSection>,
}

fn default_split_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobsSection {
    #[serde(default)]
    pub seed: u64,
    pub classes: Vec<BlobClassSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobClassSection {
    pub center: Vec<f64>,
    pub stdev: f64,
    pub count: usize,
}

impl BlobsSection {
    pub fn to_spec(&self) -> BlobSpec {
        BlobSpec {
            classes: self
                .classes
                .iter()
                .map(|c| BlobClass {
                    center: c.center.clone(),
                    stdev: c.stdev,
                    count: c.count,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub l2: f64,
    pub mc_passes: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden_dim: t.hidden_dim,
            dropout_p: t.dropout_p,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            minibatch: t.minibatch,
            l2: t.l2,
            mc_passes: 10,
        }
    }
}

impl ModelSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_dim: self.hidden_dim,
            dropout_p: self.dropout_p,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            minibatch: self.minibatch,
            l2: self.l2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub alpha0: f64,
    pub alpha_min: f64,
    pub beta: f64,
    pub tau0: f64,
    pub tau_min: f64,
    pub eps0: f64,
    pub eps_min: f64,
    pub weight_floor: f64,
    pub weight_cap: f64,
    pub dominance: f64,
    pub strategy_order: Vec<String>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let c = ControllerConfig::default();
        Self {
            alpha0: c.alpha0,
            alpha_min: c.alpha_min,
            beta: c.beta,
            tau0: c.tau0,
            tau_min: c.tau_min,
            eps0: c.eps0,
            eps_min: c.eps_min,
            weight_floor: c.weight_floor,
            weight_cap: c.weight_cap,
            dominance: c.dominance,
            strategy_order: c.strategy_order,
        }
    }
}

impl ControllerSection {
    pub fn to_controller_config(&self, total_rounds: usize) -> ControllerConfig {
        ControllerConfig {
            strategy_order: self.strategy_order.clone(),
            total_rounds,
            alpha0: self.alpha0,
            alpha_min: self.alpha_min,
            beta: self.beta,
            tau0: self.tau0,
            tau_min: self.tau_min,
            eps0: self.eps0,
            eps_min: self.eps_min,
            weight_floor: self.weight_floor,
            weight_cap: self.weight_cap,
            dominance: self.dominance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub rounds: usize,
    pub budget: usize,
    pub init_size: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    1
}

impl LoopSection {
    pub fn to_loop_config(&self, mc_passes: usize) -> LoopConfig {
        LoopConfig {
            rounds: self.rounds,
            budget: self.budget,
            init_size: self.init_size,
            mc_passes,
        }
    }
}

/// Standalone blob spec file for `gen-dataset`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpecFile {
    #[serde(default)]
    pub seed: u64,
    pub classes: Vec<BlobClassSection>,
}

impl BlobSpecFile {
    pub fn to_spec(&self) -> BlobSpec {
        BlobsSection {
            seed: self.seed,
            classes: self.classes.clone(),
        }
        .to_spec()
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{e}")))?;
    validate(&config)?;
    Ok(config)
}

pub fn load_blob_spec(path: &Path) -> Result<BlobSpecFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{e}")))
}

pub fn validate(config: &RunConfig) -> Result<(), CliError> {
    match config.dataset.source.as_str() {
        "blobs" => {
            if config.dataset.blobs.is_none() {
                return Err(CliError::Config(
                    "dataset.source = \"blobs\" requires a [dataset.blobs] table".into(),
                ));
            }
        }
        "csv" => {
            if config.dataset.path.is_none() {
                return Err(CliError::Config(
                    "dataset.source = \"csv\" requires dataset.path".into(),
                ));
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "dataset.source must be \"blobs\" or \"csv\", got {other:?}"
            )))
        }
    }
    if !(config.dataset.split_fraction > 0.0 && config.dataset.split_fraction < 1.0) {
        return Err(CliError::Config(
            "dataset.split_fraction must be in (0,1)".into(),
        ));
    }
    if config.methods.is_empty() {
        return Err(CliError::Config("methods must not be empty".into()));
    }
    for method in &config.methods {
        Method::parse(method).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Metric::parse(&config.metric).map_err(|e| CliError::Config(e.to_string()))?;
    if config.loop_section.seeds.is_empty() {
        return Err(CliError::Config("loop.seeds must not be empty".into()));
    }
    if config.loop_section.folds == 0 {
        return Err(CliError::Config("loop.folds must be >= 1".into()));
    }
    if config.loop_section.rounds < 1 {
        return Err(CliError::Config("loop.rounds must be >= 1".into()));
    }
    if config.loop_section.budget < 1 {
        return Err(CliError::Config("loop.budget must be >= 1".into()));
    }
    if config.model.mc_passes < 2 {
        return Err(CliError::Config("model.mc_passes must be >= 2".into()));
    }
    let controller = config
        .controller
        .to_controller_config(config.loop_section.rounds);
    controller
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    for name in &controller.strategy_order {
        wavefuse_core::strategies::create_strategy(name)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
methods = ["random"]

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

[loop]
rounds = 2
budget = 4
init_size = 4
seeds = [1]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        validate(&config).unwrap();
        assert_eq!(config.metric, "accuracy");
        assert_eq!(config.loop_section.folds, 1);
        assert_eq!(config.model.hidden_dim, 32);
        assert_eq!(config.controller.alpha0, 0.3);
        assert_eq!(
            config.controller.strategy_order,
            vec!["bald", "badge", "entropy", "coreset"]
        );
    }

    #[test]
    fn unknown_key_is_named_in_error() {
        let bad = MINIMAL.replace("rounds = 2", "rounds = 2\naplha0 = 0.3");
        let err = toml::from_str::<RunConfig>(&bad).unwrap_err().to_string();
        assert!(err.contains("aplha0"), "error was: {err}");
    }

    #[test]
    fn cross_field_validation() {
        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.dataset.source = "csv".into();
        assert!(matches!(validate(&config), Err(CliError::Config(_))));
        config.dataset.source = "hdf5".into();
        assert!(matches!(validate(&config), Err(CliError::Config(_))));

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.methods = vec!["qbc".into()];
        assert!(matches!(validate(&config), Err(CliError::Config(_))));

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.controller.weight_floor = 0.5;
        assert!(matches!(validate(&config), Err(CliError::Config(_))));
    }
}
