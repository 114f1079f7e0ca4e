//! Acquisition strategies behind a common trait.
//!
//! Every selector — entropy, margin, BALD, BADGE, core-set, random — is an
//! [`AcquisitionStrategy`] registered by name, so runs pick strategies at
//! runtime from configuration. The low-level scoring/selection primitives
//! are plain functions ([`scoring`], [`kcenter`], [`kmeanspp`]); the trait
//! impls adapt them to a shared per-round [`AcquisitionContext`] and
//! translate positional picks into dataset indices.

pub mod kcenter;
pub mod kmeanspp;
pub mod scoring;

use crate::learner::{
    gradient_embeddings, mc_dropout_predict, penultimate_embeddings, predict_proba,
    EmbeddingMatrix, GradEmbMatrix, LearnerError, McStack, MlpParams, ProbMatrix,
};
use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

pub use kcenter::kcenter_select;
pub use kmeanspp::{badge_select, kmeanspp_select};
pub use scoring::{bald_pixelwise, bald_scores, entropy_scores, margin_scores, top_k};

#[derive(Error, Debug)]
pub enum StrategyError {
    #[error("budget {requested} exceeds {available} candidates")]
    Budget { requested: usize, available: usize },
    #[error("unknown strategy: {0}")]
    Unknown(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Per-candidate scores aligned with a candidate index list.
pub type ScoreVector = Vec<f64>;

/// The outcome of one selection call.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Chosen indices in selection order.
    pub chosen: Vec<usize>,
    /// Name of the strategy that produced the batch.
    pub strategy: String,
    /// Numeric diagnostics, e.g. the covering radius for core-set.
    pub diagnostics: BTreeMap<String, f64>,
}

impl SelectionResult {
    pub fn new(strategy: &str, chosen: Vec<usize>) -> Self {
        Self {
            chosen,
            strategy: strategy.to_string(),
            diagnostics: BTreeMap::new(),
        }
    }
}

/// Everything a strategy may need in one round, rows aligned with
/// `candidates` (ascending dataset indices of the unlabeled pool).
pub struct AcquisitionContext<'a> {
    pub candidates: &'a [usize],
    pub probs: &'a ProbMatrix,
    pub mc_stack: &'a McStack,
    pub unlabeled_embeddings: &'a EmbeddingMatrix,
    pub labeled_embeddings: &'a EmbeddingMatrix,
    pub gradient_embeddings: &'a GradEmbMatrix,
}

/// Owned form of [`AcquisitionContext`], computed once per round from the
/// trained model and subset as candidates are consumed.
#[derive(Debug, Clone)]
pub struct RoundInputs {
    pub candidates: Vec<usize>,
    pub probs: ProbMatrix,
    pub mc_stack: McStack,
    pub unlabeled_embeddings: EmbeddingMatrix,
    pub labeled_embeddings: EmbeddingMatrix,
    pub gradient_embeddings: GradEmbMatrix,
}

impl RoundInputs {
    /// Runs the model over the pool: probabilities, an `m`-pass MC-dropout
    /// stack, penultimate embeddings for both pool sides, and gradient
    /// embeddings for the candidates.
    pub fn compute(
        params: &MlpParams,
        dataset: &crate::dataset::Dataset,
        labeled: &[usize],
        unlabeled: &[usize],
        mc_passes: usize,
        mc_seed: u64,
    ) -> Result<Self, StrategyError> {
        let unl = dataset.rows(unlabeled);
        let lab = dataset.rows(labeled);
        Ok(Self {
            candidates: unlabeled.to_vec(),
            probs: predict_proba(params, &unl.view())?,
            mc_stack: mc_dropout_predict(params, &unl.view(), mc_passes, mc_seed)?,
            unlabeled_embeddings: penultimate_embeddings(params, &unl.view())?,
            labeled_embeddings: penultimate_embeddings(params, &lab.view())?,
            gradient_embeddings: gradient_embeddings(params, &unl.view())?,
        })
    }

    pub fn as_context(&self) -> AcquisitionContext<'_> {
        AcquisitionContext {
            candidates: &self.candidates,
            probs: &self.probs,
            mc_stack: &self.mc_stack,
            unlabeled_embeddings: &self.unlabeled_embeddings,
            labeled_embeddings: &self.labeled_embeddings,
            gradient_embeddings: &self.gradient_embeddings,
        }
    }

    /// Restriction to the candidate rows at `keep` (positions, ascending).
    /// Points selected earlier in a round also join the labeled embeddings
    /// so later strategies see them as covered.
    pub fn subset(&self, keep: &[usize], newly_labeled_positions: &[usize]) -> Self {
        let probs = ProbMatrix::new(self.probs.values().select(Axis(0), keep))
            .expect("row subset of a probability matrix");
        let mc = McStack::new(self.mc_stack.values().select(Axis(1), keep))
            .expect("sample subset of an MC stack");
        let mut labeled = self.labeled_embeddings.clone();
        if !newly_labeled_positions.is_empty() {
            let extra = self
                .unlabeled_embeddings
                .select(Axis(0), newly_labeled_positions);
            labeled = ndarray::concatenate![Axis(0), labeled, extra];
        }
        Self {
            candidates: keep.iter().map(|&p| self.candidates[p]).collect(),
            probs,
            mc_stack: mc,
            unlabeled_embeddings: self.unlabeled_embeddings.select(Axis(0), keep),
            labeled_embeddings: labeled,
            gradient_embeddings: self.gradient_embeddings.select(Axis(0), keep),
        }
    }
}

/// A named batch selector over the unlabeled pool.
pub trait AcquisitionStrategy: Send + Sync {
    /// Registry name.
    fn name(&self) -> &'static str;

    /// Chooses `budget` dataset indices from `ctx.candidates`.
    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        seed: u64,
    ) -> Result<SelectionResult, StrategyError>;
}

pub(crate) fn check_budget(budget: usize, available: usize) -> Result<(), StrategyError> {
    if budget > available {
        return Err(StrategyError::Budget {
            requested: budget,
            available,
        });
    }
    Ok(())
}

/// Entropy of the deterministic predictive distribution.
pub struct EntropyStrategy;

impl AcquisitionStrategy for EntropyStrategy {
    fn name(&self) -> &'static str {
        "entropy"
    }

    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        _seed: u64,
    ) -> Result<SelectionResult, StrategyError> {
        let scores = entropy_scores(ctx.probs);
        let mut result = top_k(&scores, ctx.candidates, budget)?;
        result.strategy = self.name().to_string();
        Ok(result)
    }
}

/// Negative top-two probability gap.
pub struct MarginStrategy;

impl AcquisitionStrategy for MarginStrategy {
    fn name(&self) -> &'static str {
        "margin"
    }

    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        _seed: u64,
    ) -> Result<SelectionResult, StrategyError> {
        let scores = margin_scores(ctx.probs)?;
        let mut result = top_k(&scores, ctx.candidates, budget)?;
        result.strategy = self.name().to_string();
        Ok(result)
    }
}

/// Mutual information across MC-dropout passes.
pub struct BaldStrategy;

impl AcquisitionStrategy for BaldStrategy {
    fn name(&self) -> &'static str {
        "bald"
    }

    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        _seed: u64,
    ) -> Result<SelectionResult, StrategyError> {
        let scores = bald_scores(ctx.mc_stack);
        let mut result = top_k(&scores, ctx.candidates, budget)?;
        result.strategy = self.name().to_string();
        Ok(result)
    }
}

/// k-means++ seeding over gradient embeddings.
pub struct BadgeStrategy;

impl AcquisitionStrategy for BadgeStrategy {
    fn name(&self) -> &'static str {
        "badge"
    }

    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        seed: u64,
    ) -> Result<SelectionResult, StrategyError> {
        let mut result = badge_select(&ctx.gradient_embeddings.view(), budget, seed)?;
        result.chosen = result.chosen.iter().map(|&p| ctx.candidates[p]).collect();
        Ok(result)
    }
}

/// Greedy k-center (farthest-first) over penultimate embeddings.
pub struct CoreSetStrategy;

impl AcquisitionStrategy for CoreSetStrategy {
    fn name(&self) -> &'static str {
        "coreset"
    }

    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        _seed: u64,
    ) -> Result<SelectionResult, StrategyError> {
        let mut result = kcenter_select(
            &ctx.labeled_embeddings.view(),
            &ctx.unlabeled_embeddings.view(),
            budget,
        )?;
        result.chosen = result.chosen.iter().map(|&p| ctx.candidates[p]).collect();
        Ok(result)
    }
}

/// Uniform sampling without replacement.
pub struct RandomStrategy;

impl AcquisitionStrategy for RandomStrategy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(
        &self,
        ctx: &AcquisitionContext<'_>,
        budget: usize,
        seed: u64,
    ) -> Result<SelectionResult, StrategyError> {
        random_select(ctx.candidates, budget, seed)
    }
}

/// Uniform sample of `b` indices from `pool` without replacement, in draw
/// order. Deterministic per seed.
pub fn random_select(
    pool: &[usize],
    b: usize,
    seed: u64,
) -> Result<SelectionResult, StrategyError> {
    check_budget(b, pool.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = pool.to_vec();
    for i in 0..b {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    items.truncate(b);
    Ok(SelectionResult::new("random", items))
}

type StrategyCtor = fn() -> Box<dyn AcquisitionStrategy>;

/// Name → constructor table. The first four entries are the canonical
/// fusion order used by the controller.
const REGISTRY: &[(&str, StrategyCtor)] = &[
    ("bald", || Box::new(BaldStrategy)),
    ("badge", || Box::new(BadgeStrategy)),
    ("entropy", || Box::new(EntropyStrategy)),
    ("coreset", || Box::new(CoreSetStrategy)),
    ("margin", || Box::new(MarginStrategy)),
    ("random", || Box::new(RandomStrategy)),
];

/// Instantiates a registered strategy by name.
pub fn create_strategy(name: &str) -> Result<Box<dyn AcquisitionStrategy>, StrategyError> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor())
        .ok_or_else(|| StrategyError::Unknown(name.to_string()))
}

/// All registered strategy names.
pub fn registered_strategies() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// The default fused-strategy order.
pub fn canonical_order() -> Vec<&'static str> {
    vec!["bald", "badge", "entropy", "coreset"]
}
