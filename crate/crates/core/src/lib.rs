//! Pool-based active learning with multi-strategy acquisition fusion.
//!
//! The crate is organized around the round loop of pool-based active
//! learning: a small probabilistic classifier is retrained on the labeled
//! set, acquisition strategies score or select from the unlabeled pool,
//! and a controller decides how the per-round labeling budget is split
//! between strategies.
//!
//! - [`dataset`] — datasets, train/test splits, pool bookkeeping,
//!   synthetic blob generation and CSV loading.
//! - [`learner`] — a one-hidden-layer MLP with dropout that supplies class
//!   probabilities, MC-dropout stacks, penultimate embeddings and gradient
//!   embeddings.
//! - [`strategies`] — the acquisition strategies (entropy, margin, BALD,
//!   BADGE, core-set, random) behind a common trait, registered by name.
//! - [`controller`] — sinusoidal temporal priors fused with
//!   performance-adaptive weighting, budget apportionment, and the
//!   alternating baseline schedule.
//! - [`harness`] — the full active-learning loop, per-round records, and
//!   multi-run aggregation.
//! - [`metrics`] — accuracy, F1, Dice and IoU.
//! - [`stats`] — paired t-test on top of a hand-rolled regularized
//!   incomplete beta function.

pub mod controller;
pub mod dataset;
pub mod harness;
pub mod learner;
pub mod metrics;
pub mod seeds;
pub mod stats;
pub mod strategies;
