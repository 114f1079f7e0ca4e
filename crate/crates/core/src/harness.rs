//! The active-learning loop and multi-run aggregation.
//!
//! One run: seed the labeled set stratified, then for each round train the
//! learner from scratch, evaluate on the isolated test split, let the
//! method pick the next batch, and move it into the labeled set. A final
//! post-loop evaluation measures the model trained on the complete labeled
//! set. Everything is a pure function of (dataset, config, seed).

use crate::controller::{
    alternating_schedule, apportion_budget, select_round_batch, ControllerConfig, ControllerError,
    WaveFuseController,
};
use crate::dataset::{stratified_init, update_pools, Dataset, DatasetError, PoolState};
use crate::learner::{argmax_row, predict_proba, train, LearnerError, MlpParams, TrainConfig};
use crate::metrics::{accuracy, macro_f1, positive_f1, MetricError};
use crate::seeds;
use crate::strategies::{create_strategy, AcquisitionStrategy, RoundInputs, StrategyError};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("test-split isolation violated: index {0} selected")]
    Isolation(usize),
    #[error("aggregation error: {0}")]
    Aggregation(String),
}

/// Which test-split metric drives evaluation and the controller traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    /// Macro-averaged F1 for K > 2, positive-class F1 for K = 2.
    F1,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::F1 => "f1",
        }
    }

    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "accuracy" => Ok(Metric::Accuracy),
            "f1" => Ok(Metric::F1),
            other => Err(HarnessError::Config(format!("unknown metric: {other}"))),
        }
    }

    pub fn evaluate(
        &self,
        preds: &[usize],
        labels: &[usize],
        k: usize,
    ) -> Result<f64, MetricError> {
        match self {
            Metric::Accuracy => accuracy(preds, labels),
            Metric::F1 if k == 2 => positive_f1(preds, labels),
            Metric::F1 => macro_f1(preds, labels, k),
        }
    }
}

/// An experiment method: a single acquisition strategy, the alternating
/// baseline, or the fused controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Single(String),
    Alternating,
    WaveFuse,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "wavefuse" => Ok(Method::WaveFuse),
            "alternating" => Ok(Method::Alternating),
            other => {
                create_strategy(other)
                    .map_err(|_| HarnessError::Config(format!("unknown method: {other}")))?;
                Ok(Method::Single(other.to_string()))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Method::Single(s) => s.clone(),
            Method::Alternating => "alternating".to_string(),
            Method::WaveFuse => "wavefuse".to_string(),
        }
    }
}

/// Loop shape: rounds, per-round budget, initial labeled size, MC passes.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub rounds: usize,
    pub budget: usize,
    pub init_size: usize,
    pub mc_passes: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            budget: 40,
            init_size: 40,
            mc_passes: 10,
        }
    }
}

impl LoopConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.rounds < 1 {
            return Err(HarnessError::Config("rounds must be >= 1".into()));
        }
        if self.budget < 1 {
            return Err(HarnessError::Config("budget must be >= 1".into()));
        }
        if self.mc_passes < 2 {
            return Err(HarnessError::Config("mc_passes must be >= 2".into()));
        }
        Ok(())
    }
}

/// Everything a run needs besides the data and the seed.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub loop_config: LoopConfig,
    pub train_config: TrainConfig,
    pub controller_config: ControllerConfig,
    pub metric: Metric,
}

/// Controller decisions recorded for one round (fused and alternating
/// methods; single-strategy runs have none).
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRound {
    pub strategy_names: Vec<String>,
    pub psi: Vec<f64>,
    pub attributed: Vec<f64>,
    pub omega: Vec<f64>,
    pub weights: Vec<f64>,
    pub quotas: Vec<usize>,
    pub exploration: usize,
}

/// One round of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Labeled-set size after this round's batch joined it.
    pub n_labeled: usize,
    /// Metric of the model trained before this round's selection.
    pub metric_value: f64,
    pub selected: Vec<usize>,
    pub controller: Option<ControllerRound>,
}

/// A full run of one method on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub metric_name: String,
    pub records: Vec<RoundRecord>,
    /// Metric of the model trained on the final labeled set.
    pub final_metric: f64,
    /// True when the pool emptied before all rounds completed.
    pub truncated: bool,
}

fn evaluate_model(
    params: &MlpParams,
    dataset: &Dataset,
    test_indices: &[usize],
    metric: Metric,
) -> Result<f64, HarnessError> {
    let features = dataset.rows(test_indices);
    let probs = predict_proba(params, &features.view())?;
    let preds: Vec<usize> = (0..test_indices.len())
        .map(|i| argmax_row(probs.values().row(i).as_slice().unwrap()))
        .collect();
    let labels = dataset.labels_for(test_indices);
    Ok(metric.evaluate(&preds, &labels, dataset.n_classes())?)
}

fn fused_strategy_set(
    config: &ControllerConfig,
) -> Result<Vec<Box<dyn AcquisitionStrategy>>, HarnessError> {
    config
        .strategy_order
        .iter()
        .map(|name| create_strategy(name).map_err(HarnessError::from))
        .collect()
}

/// Runs the full loop for one (method, seed). Returns per-round records,
/// the final metric, and whether the pool was exhausted early.
pub fn run_active_learning(
    dataset: &Dataset,
    train_indices: &[usize],
    test_indices: &[usize],
    method: &Method,
    options: &RunOptions,
    seed: u64,
) -> Result<RunResult, HarnessError> {
    options.loop_config.validate()?;
    if test_indices.is_empty() {
        return Err(HarnessError::Config("empty test split".into()));
    }
    let mut train_sorted = train_indices.to_vec();
    train_sorted.sort_unstable();

    let mut pool = stratified_init(dataset, train_indices, options.loop_config.init_size, seed)?;
    let budget = options.loop_config.budget;

    let single = match method {
        Method::Single(name) => Some(create_strategy(name)?),
        _ => None,
    };
    let fused = match method {
        Method::Single(_) => Vec::new(),
        _ => fused_strategy_set(&options.controller_config)?,
    };
    let mut controller = match method {
        Method::WaveFuse => {
            let mut config = options.controller_config.clone();
            config.total_rounds = options.loop_config.rounds;
            Some(WaveFuseController::new(config)?)
        }
        _ => None,
    };

    let mut records = Vec::with_capacity(options.loop_config.rounds);
    let mut truncated = false;

    for t in 1..=options.loop_config.rounds {
        if pool.unlabeled().is_empty() {
            truncated = true;
            break;
        }
        let round_budget = budget.min(pool.unlabeled().len());
        if round_budget < budget {
            truncated = true;
        }

        let train_config = TrainConfig {
            seed: seeds::derive2(seed, seeds::SALT_TRAIN, t as u64),
            ..options.train_config.clone()
        };
        let params = train(dataset, pool.labeled(), &train_config)?;
        let metric_value = evaluate_model(&params, dataset, test_indices, options.metric)?;

        let controller_round;
        let quotas;
        match method {
            Method::Single(_) => {
                controller_round = None;
                quotas = None;
            }
            Method::Alternating => {
                let s = options.controller_config.n_strategies();
                let weights = alternating_schedule(t, s);
                let q = apportion_budget(&weights, round_budget, 0.0)?;
                controller_round = Some(ControllerRound {
                    strategy_names: options.controller_config.strategy_order.clone(),
                    psi: vec![0.0; s],
                    attributed: vec![0.0; s],
                    omega: vec![0.0; s],
                    weights: weights.values().to_vec(),
                    quotas: q.strategies.clone(),
                    exploration: q.exploration,
                });
                quotas = Some(q);
            }
            Method::WaveFuse => {
                let ctrl = controller.as_mut().expect("controller for wavefuse");
                let plan = ctrl.plan_round(t, metric_value)?;
                let q = apportion_budget(&plan.weights, round_budget, plan.eps)?;
                ctrl.commit_quotas(q.clone(), round_budget);
                controller_round = Some(ControllerRound {
                    strategy_names: options.controller_config.strategy_order.clone(),
                    psi: plan.psi,
                    attributed: plan.attributed,
                    omega: plan.omega,
                    weights: plan.weights.values().to_vec(),
                    quotas: q.strategies.clone(),
                    exploration: q.exploration,
                });
                quotas = Some(q);
            }
        }

        let inputs = RoundInputs::compute(
            &params,
            dataset,
            pool.labeled(),
            pool.unlabeled(),
            options.loop_config.mc_passes,
            seeds::derive2(seed, seeds::SALT_MC, t as u64),
        )?;
        let select_seed = seeds::derive2(seed, seeds::SALT_SELECT, t as u64);
        let selected = match (&single, quotas) {
            (Some(strategy), None) => {
                strategy
                    .select(&inputs.as_context(), round_budget, select_seed)?
                    .chosen
            }
            (None, Some(q)) => select_round_batch(&fused, &inputs, &q, select_seed)?.chosen,
            _ => unreachable!("method dispatch"),
        };

        for &i in &selected {
            if train_sorted.binary_search(&i).is_err() {
                return Err(HarnessError::Isolation(i));
            }
        }

        pool = update_pools(&pool, &selected)?;
        records.push(RoundRecord {
            round: t,
            n_labeled: pool.labeled().len(),
            metric_value,
            selected,
            controller: controller_round,
        });
    }

    // Post-loop evaluation: the model trained on everything labeled so far.
    let final_config = TrainConfig {
        seed: seeds::derive2(
            seed,
            seeds::SALT_TRAIN,
            options.loop_config.rounds as u64 + 1,
        ),
        ..options.train_config.clone()
    };
    let final_params = train(dataset, pool.labeled(), &final_config)?;
    let final_metric = evaluate_model(&final_params, dataset, test_indices, options.metric)?;

    Ok(RunResult {
        method: method.name(),
        seed,
        metric_name: options.metric.name().to_string(),
        records,
        final_metric,
        truncated,
    })
}

/// Aggregated metric statistics for one method at one round.
/// `round == rounds + 1` carries the final post-loop evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub round: usize,
    pub metric_name: String,
    pub mean: f64,
    pub std: f64,
    pub n_runs: usize,
    pub single_run: bool,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    // Sort before summing so aggregation is exactly permutation-invariant.
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() < 2 {
        return (mean, 0.0);
    }
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-method mean/std of the metric at every round plus the final
/// evaluation. Runs of one method must agree on their round sequence.
pub fn aggregate_runs(results: &[RunResult]) -> Result<Vec<AggregateRow>, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::Aggregation("no runs".into()));
    }
    let mut by_method: std::collections::BTreeMap<&str, Vec<&RunResult>> = Default::default();
    for r in results {
        by_method.entry(&r.method).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (method, runs) in by_method {
        let rounds: Vec<usize> = runs[0].records.iter().map(|r| r.round).collect();
        for run in &runs {
            let mine: Vec<usize> = run.records.iter().map(|r| r.round).collect();
            if mine != rounds {
                return Err(HarnessError::Aggregation(format!(
                    "misaligned rounds for method {method}"
                )));
            }
        }
        let metric_name = runs[0].metric_name.clone();
        let n_runs = runs.len();
        for (pos, &round) in rounds.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|r| r.records[pos].metric_value).collect();
            let (mean, std) = mean_std(&values);
            rows.push(AggregateRow {
                method: method.to_string(),
                round,
                metric_name: metric_name.clone(),
                mean,
                std,
                n_runs,
                single_run: n_runs == 1,
            });
        }
        let finals: Vec<f64> = runs.iter().map(|r| r.final_metric).collect();
        let (mean, std) = mean_std(&finals);
        rows.push(AggregateRow {
            method: method.to_string(),
            round: rounds.last().copied().unwrap_or(0) + 1,
            metric_name,
            mean,
            std,
            n_runs,
            single_run: n_runs == 1,
        });
    }
    Ok(rows)
}

/// Replays a run's selections through fresh pool state; used to audit that
/// records alone reproduce the final labeled set.
pub fn replay_selections(
    initial: &PoolState,
    records: &[RoundRecord],
) -> Result<PoolState, HarnessError> {
    let mut pool = initial.clone();
    for record in records {
        pool = update_pools(&pool, &record.selected)?;
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::sinusoidal_prior;
    use crate::dataset::{generate_blobs, stratified_split, BlobClass, BlobSpec};
    use approx::assert_abs_diff_eq;

    fn blob_dataset() -> Dataset {
        let spec = BlobSpec {
            classes: vec![
                BlobClass {
                    center: vec![0.0, 0.0],
                    stdev: 0.8,
                    count: 60,
                },
                BlobClass {
                    center: vec![3.0, 3.0],
                    stdev: 0.8,
                    count: 60,
                },
            ],
        };
        generate_blobs(&spec, 11).unwrap()
    }

    fn quick_options(rounds: usize, budget: usize) -> RunOptions {
        RunOptions {
            loop_config: LoopConfig {
                rounds,
                budget,
                init_size: 6,
                mc_passes: 4,
            },
            train_config: TrainConfig {
                hidden_dim: 8,
                epochs: 15,
                dropout_p: 0.2,
                ..TrainConfig::default()
            },
            controller_config: ControllerConfig::default(),
            metric: Metric::Accuracy,
        }
    }

    #[test]
    fn random_run_with_full_budget_labels_everything() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        // b = |U_0| = train size minus the initial labeled set
        let options = quick_options(1, train_idx.len() - 6);
        let result = run_active_learning(
            &ds,
            &train_idx,
            &test_idx,
            &Method::Single("random".into()),
            &options,
            3,
        )
        .unwrap();
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.records[0].n_labeled, train_idx.len());
        assert!(!result.truncated);
    }

    #[test]
    fn runs_are_deterministic() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        let options = quick_options(3, 8);
        for method in [
            Method::Single("entropy".into()),
            Method::Alternating,
            Method::WaveFuse,
        ] {
            let a = run_active_learning(&ds, &train_idx, &test_idx, &method, &options, 7).unwrap();
            let b = run_active_learning(&ds, &train_idx, &test_idx, &method, &options, 7).unwrap();
            assert_eq!(a, b, "{method:?}");
            // records alone rebuild the final labeled set, whatever the method
            let initial = stratified_init(&ds, &train_idx, 6, 7).unwrap();
            let replayed = replay_selections(&initial, &a.records).unwrap();
            assert_eq!(replayed.labeled().len(), 6 + 3 * 8, "{method:?}");
        }
    }

    #[test]
    fn pure_cycling_weights_match_prior() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        let mut options = quick_options(5, 8);
        options.controller_config = ControllerConfig {
            alpha0: 1.0,
            alpha_min: 1.0,
            eps0: 0.0,
            eps_min: 0.0,
            weight_floor: 0.0,
            weight_cap: 1.0,
            dominance: 1.0,
            ..ControllerConfig::default()
        };
        let result =
            run_active_learning(&ds, &train_idx, &test_idx, &Method::WaveFuse, &options, 5)
                .unwrap();
        for record in &result.records {
            let ctrl = record.controller.as_ref().unwrap();
            let psi = sinusoidal_prior(record.round, 5, 4);
            let sum: f64 = psi.iter().sum();
            for (got, want) in ctrl.weights.iter().zip(psi.iter().map(|p| p / sum)) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn labeled_grows_by_budget_and_replays() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        let options = quick_options(4, 7);
        let result =
            run_active_learning(&ds, &train_idx, &test_idx, &Method::WaveFuse, &options, 2)
                .unwrap();
        for (i, record) in result.records.iter().enumerate() {
            assert_eq!(record.n_labeled, 6 + (i + 1) * 7);
            assert_eq!(record.selected.len(), 7);
            // isolation: nothing from the test split
            for sel in &record.selected {
                assert!(test_idx.binary_search(sel).is_err());
            }
        }
        let initial = stratified_init(&ds, &train_idx, 6, 2).unwrap();
        let replayed = replay_selections(&initial, &result.records).unwrap();
        assert_eq!(replayed.labeled().len(), 6 + 4 * 7);
    }

    #[test]
    fn pool_exhaustion_truncates_cleanly() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        // budget large enough to drain the pool before rounds run out
        let options = quick_options(5, 40);
        let result = run_active_learning(
            &ds,
            &train_idx,
            &test_idx,
            &Method::Single("random".into()),
            &options,
            1,
        )
        .unwrap();
        assert!(result.truncated);
        let last = result.records.last().unwrap();
        assert_eq!(last.n_labeled, train_idx.len());
    }

    #[test]
    fn wavefuse_quotas_total_budget_every_round() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        let options = quick_options(4, 9);
        let result =
            run_active_learning(&ds, &train_idx, &test_idx, &Method::WaveFuse, &options, 21)
                .unwrap();
        for record in &result.records {
            let ctrl = record.controller.as_ref().unwrap();
            let total: usize = ctrl.quotas.iter().sum::<usize>() + ctrl.exploration;
            assert_eq!(total, 9);
            let wsum: f64 = ctrl.weights.iter().sum();
            assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn alternating_gives_whole_budget_to_one_strategy() {
        let ds = blob_dataset();
        let (train_idx, test_idx) = stratified_split(&ds, 0.8, 1).unwrap();
        let options = quick_options(4, 5);
        let result = run_active_learning(
            &ds,
            &train_idx,
            &test_idx,
            &Method::Alternating,
            &options,
            13,
        )
        .unwrap();
        for (i, record) in result.records.iter().enumerate() {
            let ctrl = record.controller.as_ref().unwrap();
            assert_eq!(ctrl.quotas[i % 4], 5);
            assert_eq!(ctrl.quotas.iter().sum::<usize>(), 5);
            assert_eq!(ctrl.exploration, 0);
        }
    }

    #[test]
    fn metric_dispatch_binary_vs_macro() {
        assert_eq!(Metric::parse("accuracy").unwrap(), Metric::Accuracy);
        assert_eq!(Metric::parse("f1").unwrap(), Metric::F1);
        assert!(Metric::parse("auc").is_err());
        // binary: positive-class F1
        let v = Metric::F1
            .evaluate(&[1, 1, 1, 1], &[1, 1, 0, 0], 2)
            .unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-12);
        // multi-class: macro
        let v = Metric::F1.evaluate(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn method_parse_rejects_unknown() {
        assert!(Method::parse("wavefuse").is_ok());
        assert!(Method::parse("alternating").is_ok());
        assert!(Method::parse("coreset").is_ok());
        assert!(matches!(
            Method::parse("gradient-descent"),
            Err(HarnessError::Config(_))
        ));
    }

    fn fake_run(method: &str, seed: u64, values: &[f64], final_metric: f64) -> RunResult {
        RunResult {
            method: method.into(),
            seed,
            metric_name: "accuracy".into(),
            records: values
                .iter()
                .enumerate()
                .map(|(i, &v)| RoundRecord {
                    round: i + 1,
                    n_labeled: 10 * (i + 2),
                    metric_value: v,
                    selected: vec![],
                    controller: None,
                })
                .collect(),
            final_metric,
            truncated: false,
        }
    }

    #[test]
    fn aggregate_two_point_example() {
        let runs = vec![
            fake_run("random", 1, &[0.6], 0.6),
            fake_run("random", 2, &[0.8], 0.8),
        ];
        let rows = aggregate_runs(&runs).unwrap();
        let row = &rows[0];
        assert_abs_diff_eq!(row.mean, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(row.std, 0.1414, epsilon = 1e-4);
        assert_eq!(row.n_runs, 2);
        assert!(!row.single_run);
        // final row
        assert_eq!(rows[1].round, 2);
    }

    #[test]
    fn aggregate_identical_runs_and_single_run_flag() {
        let runs = vec![
            fake_run("entropy", 1, &[0.5, 0.6], 0.7),
            fake_run("entropy", 2, &[0.5, 0.6], 0.7),
        ];
        let rows = aggregate_runs(&runs).unwrap();
        assert!(rows.iter().all(|r| r.std == 0.0));
        let single = aggregate_runs(&[fake_run("bald", 1, &[0.5], 0.5)]).unwrap();
        assert!(single.iter().all(|r| r.single_run && r.std == 0.0));
    }

    #[test]
    fn aggregate_is_permutation_invariant_and_checks_alignment() {
        let a = fake_run("random", 1, &[0.61, 0.72], 0.8);
        let b = fake_run("random", 2, &[0.55, 0.70], 0.75);
        let c = fake_run("random", 3, &[0.58, 0.69], 0.77);
        let fwd = aggregate_runs(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = aggregate_runs(&[c, b, a.clone()]).unwrap();
        assert_eq!(fwd, rev);

        let short = fake_run("random", 4, &[0.5], 0.5);
        assert!(matches!(
            aggregate_runs(&[a, short]),
            Err(HarnessError::Aggregation(_))
        ));
    }
}
