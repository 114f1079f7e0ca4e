//! Multi-strategy fusion controller.
//!
//! Each strategy `s` of `S` gets a phase-shifted sinusoidal temporal prior
//! over the `T` acquisition rounds,
//! `Ψ_s(t) = sin(2π t/T + 2π s/S) + 1`, and an exponentially smoothed
//! performance trace `Ω_s(t) = β ω_s(t) + (1-β) Ω_s(t-1)`. The fused raw
//! weight is `α Ψ_s(t) + (1-α) softmax(Ω/τ)_s`, normalized to the simplex
//! under floor/cap/dominance bounds, and the round budget is apportioned
//! to integer per-strategy quotas by largest remainder, with a reserved
//! ε-exploration share. α, τ and ε anneal linearly over rounds.

use crate::seeds;
use crate::strategies::{
    random_select, AcquisitionStrategy, RoundInputs, SelectionResult, StrategyError,
};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ControllerError {
    #[error("invalid controller configuration: {0}")]
    Config(String),
    #[error("degenerate raw weights (all zero)")]
    DegenerateWeights,
    #[error("budget must be >= 1")]
    Budget,
    #[error("round batch infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Controller hyperparameters. Defaults follow the reference operating
/// point: α 0.3→0.02, β 0.30, τ 0.7→0.25, ε 0.10→0.02, weight bounds
/// [0.05, 0.8], dominance threshold 0.6.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub strategy_order: Vec<String>,
    pub total_rounds: usize,
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
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            strategy_order: crate::strategies::canonical_order()
                .into_iter()
                .map(String::from)
                .collect(),
            total_rounds: 10,
            alpha0: 0.3,
            alpha_min: 0.02,
            beta: 0.30,
            tau0: 0.7,
            tau_min: 0.25,
            eps0: 0.10,
            eps_min: 0.02,
            weight_floor: 0.05,
            weight_cap: 0.8,
            dominance: 0.6,
        }
    }
}

impl ControllerConfig {
    pub fn n_strategies(&self) -> usize {
        self.strategy_order.len()
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let s = self.n_strategies();
        if s < 2 {
            return Err(ControllerError::Config("need at least 2 strategies".into()));
        }
        let mut names = self.strategy_order.clone();
        names.sort();
        names.dedup();
        if names.len() != s {
            return Err(ControllerError::Config(
                "strategy_order has duplicates".into(),
            ));
        }
        if self.total_rounds < 1 {
            return Err(ControllerError::Config("total_rounds must be >= 1".into()));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min <= self.alpha0 && self.alpha0 <= 1.0) {
            return Err(ControllerError::Config(
                "need 0 <= alpha_min <= alpha0 <= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(ControllerError::Config("beta must be in [0,1]".into()));
        }
        if !(self.tau0 > 0.0 && self.tau_min > 0.0) {
            return Err(ControllerError::Config("tau values must be > 0".into()));
        }
        for (name, eps) in [("eps0", self.eps0), ("eps_min", self.eps_min)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(ControllerError::Config(format!("{name} must be in [0,1]")));
            }
        }
        let sf = s as f64;
        if !(self.weight_floor >= 0.0 && self.weight_floor * sf <= 1.0) {
            return Err(ControllerError::Config("need weight_floor * S <= 1".into()));
        }
        if self.weight_cap * sf < 1.0 {
            return Err(ControllerError::Config("need weight_cap * S >= 1".into()));
        }
        if !(self.weight_floor <= self.dominance && self.dominance <= self.weight_cap) {
            return Err(ControllerError::Config(
                "need weight_floor <= dominance <= weight_cap".into(),
            ));
        }
        // The effective upper bound min(cap, dominance) must leave room
        // for the weights to reach a total of 1.
        if self.dominance.min(self.weight_cap) * sf < 1.0 {
            return Err(ControllerError::Config(
                "need min(weight_cap, dominance) * S >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-strategy EMA traces plus the round counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub omega: Vec<f64>,
    pub round: usize,
}

/// Normalized per-strategy weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Uniform weights `1/S`.
    pub fn uniform(s: usize) -> Self {
        Self(vec![1.0 / s as f64; s])
    }

    /// One-hot weights (used by the alternating baseline).
    pub fn one_hot(s: usize, hot: usize) -> Self {
        let mut v = vec![0.0; s];
        v[hot] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Integer budget split: one quota per strategy plus an exploration share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotaVector {
    pub strategies: Vec<usize>,
    pub exploration: usize,
}

impl QuotaVector {
    pub fn total(&self) -> usize {
        self.strategies.iter().sum::<usize>() + self.exploration
    }
}

/// Phase-shifted sinusoidal prior for round `t` of `total_rounds`:
/// `Ψ_s = sin(2π t/T + 2π s/S) + 1` for s = 1..=S, each in [0, 2].
pub fn sinusoidal_prior(t: usize, total_rounds: usize, n_strategies: usize) -> Vec<f64> {
    let phase_t = TAU * t as f64 / total_rounds as f64;
    (1..=n_strategies)
        .map(|s| (phase_t + TAU * s as f64 / n_strategies as f64).sin() + 1.0)
        .collect()
}

/// EMA update `Ω_s ← β ω_s + (1-β) Ω_s`, applied only where `active`.
pub fn update_performance_trace(
    state: &ControllerState,
    observed: &[f64],
    active: &[bool],
    beta: f64,
) -> ControllerState {
    let omega = state
        .omega
        .iter()
        .zip(observed.iter().zip(active))
        .map(|(&prev, (&obs, &act))| {
            if act {
                beta * obs + (1.0 - beta) * prev
            } else {
                prev
            }
        })
        .collect();
    ControllerState {
        omega,
        round: state.round,
    }
}

fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Raw fused weights `α Ψ_s + (1-α) softmax(Ω/τ)_s`.
pub fn fuse_weights(psi: &[f64], omega: &[f64], alpha: f64, tau: f64) -> Vec<f64> {
    let scaled: Vec<f64> = omega.iter().map(|o| o / tau).collect();
    let soft = softmax(&scaled);
    psi.iter()
        .zip(&soft)
        .map(|(&p, &s)| alpha * p + (1.0 - alpha) * s)
        .collect()
}

/// Normalizes raw weights to the simplex, then waterfills against the
/// bounds `[floor, min(cap, dominance)]`: violating entries clamp to their
/// bound (caps first) and the unclamped mass is renormalized until stable.
pub fn normalize_clamp(
    raw: &[f64],
    floor: f64,
    cap: f64,
    dominance: f64,
) -> Result<WeightVector, ControllerError> {
    let s = raw.len();
    let lo = floor;
    let hi = cap.min(dominance);
    if !(lo >= 0.0 && lo <= hi && lo * s as f64 <= 1.0 && hi * s as f64 >= 1.0) {
        return Err(ControllerError::Config(format!(
            "infeasible bounds: floor {lo}, effective cap {hi}, S {s}"
        )));
    }
    if raw.iter().any(|&r| !(r.is_finite() && r >= 0.0)) {
        return Err(ControllerError::Config(
            "raw weights must be finite and >= 0".into(),
        ));
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(ControllerError::DegenerateWeights);
    }
    let base: Vec<f64> = raw.iter().map(|r| r / sum).collect();

    let mut fixed: Vec<Option<f64>> = vec![None; s];
    let mut out = base.clone();
    for _pass in 0..=s {
        let free: Vec<usize> = (0..s).filter(|&i| fixed[i].is_none()).collect();
        if free.is_empty() {
            break;
        }
        let fixed_mass: f64 = fixed.iter().flatten().sum();
        let free_mass = 1.0 - fixed_mass;
        let free_sum: f64 = free.iter().map(|&i| base[i]).sum();
        let targets: Vec<f64> = if free_sum > 0.0 {
            free.iter()
                .map(|&i| free_mass * base[i] / free_sum)
                .collect()
        } else {
            vec![free_mass / free.len() as f64; free.len()]
        };
        let over: Vec<usize> = free
            .iter()
            .zip(&targets)
            .filter(|(_, &t)| t > hi + 1e-15)
            .map(|(&i, _)| i)
            .collect();
        if !over.is_empty() {
            for i in over {
                fixed[i] = Some(hi);
            }
            continue;
        }
        let under: Vec<usize> = free
            .iter()
            .zip(&targets)
            .filter(|(_, &t)| t < lo - 1e-15)
            .map(|(&i, _)| i)
            .collect();
        if !under.is_empty() {
            for i in under {
                fixed[i] = Some(lo);
            }
            continue;
        }
        for (&i, &t) in free.iter().zip(&targets) {
            out[i] = t;
        }
        break;
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            out[i] = *v;
        }
    }

    // Feasible-but-tight bound combinations can leave a residual when every
    // entry ends up clamped; spread it over entries with slack.
    for _ in 0..64 {
        let residual = 1.0 - out.iter().sum::<f64>();
        if residual.abs() <= 1e-12 {
            break;
        }
        let slack: Vec<f64> = out
            .iter()
            .map(|&w| if residual > 0.0 { hi - w } else { w - lo })
            .map(|v| v.max(0.0))
            .collect();
        let total_slack: f64 = slack.iter().sum();
        if total_slack <= 0.0 {
            break;
        }
        let shift = residual.abs().min(total_slack);
        for (w, sl) in out.iter_mut().zip(&slack) {
            *w += residual.signum() * shift * sl / total_slack;
        }
    }
    Ok(WeightVector(out))
}

/// Splits `b` into an exploration share `round(ε b)` and per-strategy
/// quotas by floors of `(b - e) w_s` plus largest fractional remainders
/// (ties toward the lower strategy index). Totals exactly `b`.
pub fn apportion_budget(
    weights: &WeightVector,
    b: usize,
    eps: f64,
) -> Result<QuotaVector, ControllerError> {
    if b < 1 {
        return Err(ControllerError::Budget);
    }
    let exploration = ((eps * b as f64).round() as usize).min(b);
    let rest = b - exploration;
    let s = weights.len();
    let mut quotas = vec![0usize; s];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(s);
    for (i, &w) in weights.values().iter().enumerate() {
        let exact = rest as f64 * w;
        let floor = exact.floor();
        quotas[i] = floor as usize;
        remainders.push((i, exact - floor));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let assigned: usize = quotas.iter().sum();
    for &(i, _) in remainders.iter().take(rest - assigned) {
        quotas[i] += 1;
    }
    Ok(QuotaVector {
        strategies: quotas,
        exploration,
    })
}

/// Annealed `(α_t, τ_t, ε_t)`: linear from the initial values at `t = 1`
/// to the minimum values at `t = T`.
pub fn anneal(config: &ControllerConfig, t: usize) -> (f64, f64, f64) {
    let total = config.total_rounds;
    let frac = if total <= 1 {
        0.0
    } else {
        (t.saturating_sub(1)) as f64 / (total - 1) as f64
    };
    let lerp = |v0: f64, v1: f64| v0 + (v1 - v0) * frac;
    (
        lerp(config.alpha0, config.alpha_min),
        lerp(config.tau0, config.tau_min),
        lerp(config.eps0, config.eps_min),
    )
}

/// Credits the round's metric change to strategies in proportion to their
/// budget share: `ω_s = clip(m_prev + S (q_s/b) (m_curr - m_prev), 0, 1)`.
/// Strategies with zero quota are inactive and keep their trace.
pub fn attribute_performance(
    m_prev: f64,
    m_curr: f64,
    quotas: &QuotaVector,
    b: usize,
) -> (Vec<f64>, Vec<bool>) {
    let s = quotas.strategies.len() as f64;
    let delta = m_curr - m_prev;
    let omega = quotas
        .strategies
        .iter()
        .map(|&q| (m_prev + s * (q as f64 / b as f64) * delta).clamp(0.0, 1.0))
        .collect();
    let active = quotas.strategies.iter().map(|&q| q > 0).collect();
    (omega, active)
}

/// The alternating baseline: round `t` gives full weight to strategy
/// `(t-1) mod S` in canonical order.
pub fn alternating_schedule(t: usize, n_strategies: usize) -> WeightVector {
    WeightVector::one_hot(n_strategies, (t - 1) % n_strategies)
}

/// Executes one round's quotas: strategies run in descending-quota order
/// (ties follow the configured order), each selecting from the pool minus
/// indices already taken this round; exploration picks run last. The
/// combined batch has exactly `quotas.total()` distinct indices.
pub fn select_round_batch(
    strategies: &[Box<dyn AcquisitionStrategy>],
    inputs: &RoundInputs,
    quotas: &QuotaVector,
    seed: u64,
) -> Result<SelectionResult, ControllerError> {
    if strategies.len() != quotas.strategies.len() {
        return Err(ControllerError::Infeasible(format!(
            "{} strategies with {} quotas",
            strategies.len(),
            quotas.strategies.len()
        )));
    }
    let n = inputs.candidates.len();
    let total = quotas.total();
    if total > n {
        return Err(ControllerError::Infeasible(format!(
            "batch of {total} from a pool of {n}"
        )));
    }

    let mut order: Vec<usize> = (0..strategies.len()).collect();
    order.sort_by(|&a, &b| {
        quotas.strategies[b]
            .cmp(&quotas.strategies[a])
            .then(a.cmp(&b))
    });

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut taken_positions: Vec<usize> = Vec::with_capacity(total);
    let mut combined: Vec<usize> = Vec::with_capacity(total);
    let mut diagnostics = std::collections::BTreeMap::new();

    for &si in &order {
        let quota = quotas.strategies[si];
        if quota == 0 {
            continue;
        }
        let sub = inputs.subset(&remaining, &taken_positions);
        let sub_seed = seeds::derive2(seed, seeds::SALT_SELECT, si as u64);
        let picked = strategies[si].select(&sub.as_context(), quota, sub_seed)?;
        for (key, value) in picked.diagnostics {
            diagnostics.insert(format!("{}_{key}", strategies[si].name()), value);
        }
        for &global in &picked.chosen {
            let pos = inputs
                .candidates
                .binary_search(&global)
                .map_err(|_| ControllerError::Infeasible(format!("index {global} not in pool")))?;
            combined.push(global);
            taken_positions.push(pos);
            remaining.retain(|&p| p != pos);
        }
    }

    if quotas.exploration > 0 {
        let pool: Vec<usize> = remaining.iter().map(|&p| inputs.candidates[p]).collect();
        let picked = random_select(
            &pool,
            quotas.exploration,
            seeds::derive(seed, seeds::SALT_EXPLORE),
        )?;
        for &global in &picked.chosen {
            let pos = inputs
                .candidates
                .binary_search(&global)
                .expect("pool member");
            combined.push(global);
            taken_positions.push(pos);
            remaining.retain(|&p| p != pos);
        }
    }

    let mut result = SelectionResult::new("fused", combined);
    result.diagnostics = diagnostics;
    Ok(result)
}

/// Round-by-round driver owning the controller state for one run.
#[derive(Debug, Clone)]
pub struct WaveFuseController {
    config: ControllerConfig,
    omega: Vec<f64>,
    prev_metric: f64,
    prev_quotas: Option<(QuotaVector, usize)>,
}

/// Everything the controller decided for one round, for records and audit.
#[derive(Debug, Clone)]
pub struct RoundPlan {
    pub psi: Vec<f64>,
    pub attributed: Vec<f64>,
    pub omega: Vec<f64>,
    pub weights: WeightVector,
    pub alpha: f64,
    pub tau: f64,
    pub eps: f64,
}

impl WaveFuseController {
    pub fn new(config: ControllerConfig) -> Result<Self, ControllerError> {
        config.validate()?;
        let s = config.n_strategies();
        Ok(Self {
            config,
            omega: vec![0.0; s],
            prev_metric: 0.0,
            prev_quotas: None,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    /// Updates traces with the newly observed metric and produces the
    /// round's weights. Round 1 initializes every trace to the metric of
    /// the initially-trained model.
    pub fn plan_round(&mut self, t: usize, metric: f64) -> Result<RoundPlan, ControllerError> {
        let s = self.config.n_strategies();
        let attributed = match (&self.prev_quotas, t) {
            (Some((quotas, budget)), t) if t > 1 => {
                let (obs, active) =
                    attribute_performance(self.prev_metric, metric, quotas, *budget);
                let state = ControllerState {
                    omega: self.omega.clone(),
                    round: t,
                };
                self.omega =
                    update_performance_trace(&state, &obs, &active, self.config.beta).omega;
                obs
            }
            _ => {
                self.omega = vec![metric; s];
                vec![metric; s]
            }
        };
        self.prev_metric = metric;

        let (alpha, tau, eps) = anneal(&self.config, t);
        let psi = sinusoidal_prior(t, self.config.total_rounds, s);
        let raw = fuse_weights(&psi, &self.omega, alpha, tau);
        let weights = match normalize_clamp(
            &raw,
            self.config.weight_floor,
            self.config.weight_cap,
            self.config.dominance,
        ) {
            Ok(w) => w,
            Err(ControllerError::DegenerateWeights) => WeightVector::uniform(s),
            Err(e) => return Err(e),
        };
        Ok(RoundPlan {
            psi,
            attributed,
            omega: self.omega.clone(),
            weights,
            alpha,
            tau,
            eps,
        })
    }

    /// Records the quotas actually executed so the next round can
    /// attribute the observed metric change.
    pub fn commit_quotas(&mut self, quotas: QuotaVector, budget: usize) {
        self.prev_quotas = Some((quotas, budget));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::create_strategy;
    use crate::strategies::test_support::synthetic_inputs;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prior_values_at_full_and_half_period() {
        let at_t = sinusoidal_prior(10, 10, 4);
        for (got, want) in at_t.iter().zip([2.0, 1.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        let at_half = sinusoidal_prior(5, 10, 4);
        for (got, want) in at_half.iter().zip([0.0, 1.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn prior_antiphase_for_two_strategies() {
        for t in 1..=20 {
            let psi = sinusoidal_prior(t, 10, 2);
            assert_abs_diff_eq!(psi[0] + psi[1], 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn prior_periodic_and_bounded() {
        for t in 1..=30 {
            let a = sinusoidal_prior(t, 7, 5);
            let b = sinusoidal_prior(t + 7, 7, 5);
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
                assert!(*x >= -1e-12 && *x <= 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ema_direct_substitution() {
        let state = ControllerState {
            omega: vec![0.5],
            round: 1,
        };
        let next = update_performance_trace(&state, &[0.7], &[true], 0.3);
        assert_abs_diff_eq!(next.omega[0], 0.56, epsilon = 1e-12);
        let no_memory = update_performance_trace(&state, &[0.7], &[true], 1.0);
        assert_abs_diff_eq!(no_memory.omega[0], 0.7, epsilon = 1e-12);
        let frozen = update_performance_trace(&state, &[0.7], &[true], 0.0);
        assert_abs_diff_eq!(frozen.omega[0], 0.5, epsilon = 1e-12);
        let inactive = update_performance_trace(&state, &[0.9], &[false], 0.3);
        assert_abs_diff_eq!(inactive.omega[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ema_converges_geometrically() {
        let mut state = ControllerState {
            omega: vec![0.0],
            round: 0,
        };
        let beta = 0.3;
        let target = 0.8;
        let mut gap = target;
        for _ in 0..20 {
            state = update_performance_trace(&state, &[target], &[true], beta);
            let new_gap = target - state.omega[0];
            assert_abs_diff_eq!(new_gap, (1.0 - beta) * gap, epsilon = 1e-12);
            gap = new_gap;
        }
    }

    #[test]
    fn fusion_hand_example() {
        // S=4, alpha=0.3, equal traces -> softmax uniform 0.25,
        // raw = 0.3 psi + 0.175; at t=T this is (0.775, 0.475, 0.175, 0.475).
        let psi = sinusoidal_prior(10, 10, 4);
        let raw = fuse_weights(&psi, &[0.5; 4], 0.3, 0.7);
        for (got, want) in raw.iter().zip([0.775, 0.475, 0.175, 0.475]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn fusion_alpha_extremes() {
        let psi = vec![1.3, 0.2, 0.5];
        let raineq = fuse_weights(&psi, &[0.1, 0.9, 0.2], 1.0, 0.5);
        for (got, want) in raineq.iter().zip(&psi) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-12);
        }
        // alpha = 0, tiny tau: one-hot at the trace argmax
        let raw = fuse_weights(&psi, &[0.1, 0.9, 0.2], 0.0, 1e-4);
        assert!(raw[1] > 0.999_999);
        assert!(raw[0] < 1e-6 && raw[2] < 1e-6);
    }

    #[test]
    fn quotas_concentrate_on_trace_argmax_at_low_tau() {
        // alpha = 0, tau -> 0+: the argmax-trace strategy takes the
        // dominance-capped weight and the largest quota; shifting all
        // traces by a constant changes nothing.
        let psi = sinusoidal_prior(3, 10, 4);
        let omega = [0.2, 0.8, 0.4, 0.3];
        let raw = fuse_weights(&psi, &omega, 0.0, 1e-4);
        let w = normalize_clamp(&raw, 0.05, 0.8, 0.6).unwrap();
        assert_abs_diff_eq!(w.values()[1], 0.6, epsilon = 1e-9);
        let q = apportion_budget(&w, 40, 0.0).unwrap();
        assert_eq!(q.strategies.iter().max(), Some(&q.strategies[1]));
        assert_eq!(q.strategies[1], 24); // 40 * 0.6

        let shifted: Vec<f64> = omega.iter().map(|o| o + 0.13).collect();
        let raw2 = fuse_weights(&psi, &shifted, 0.0, 1e-4);
        let w2 = normalize_clamp(&raw2, 0.05, 0.8, 0.6).unwrap();
        for (a, b) in w.values().iter().zip(w2.values()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let psi = vec![0.0; 4];
        let omega = [0.3, 0.7, 0.5, 0.1];
        let shifted: Vec<f64> = omega.iter().map(|o| o + 0.17).collect();
        let a = fuse_weights(&psi, &omega, 0.0, 0.4);
        let b = fuse_weights(&psi, &shifted, 0.0, 0.4);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_plain_when_no_bound_binds() {
        let w = normalize_clamp(&[0.775, 0.475, 0.175, 0.475], 0.05, 0.8, 0.6).unwrap();
        let expected = [0.775 / 1.9, 0.475 / 1.9, 0.175 / 1.9, 0.475 / 1.9];
        assert_abs_diff_eq!(expected[0], 0.4079, epsilon = 1e-4);
        for (got, want) in w.values().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_waterfills_dominant_entry() {
        let w = normalize_clamp(&[10.0, 0.0, 0.0, 0.0], 0.05, 0.8, 0.6).unwrap();
        let want = [0.6, 0.4 / 3.0, 0.4 / 3.0, 0.4 / 3.0];
        for (got, want) in w.values().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn normalize_uniform_stays_uniform() {
        let w = normalize_clamp(&[0.7, 0.7, 0.7], 0.05, 0.8, 0.6).unwrap();
        for &v in w.values() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_all_zero() {
        assert!(matches!(
            normalize_clamp(&[0.0; 4], 0.05, 0.8, 0.6),
            Err(ControllerError::DegenerateWeights)
        ));
    }

    #[test]
    fn normalize_randomized_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..2000 {
            let s = rng.random_range(2..7);
            let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..3.0)).collect();
            if raw.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let w = normalize_clamp(&raw, 0.05, 0.8, 0.6).unwrap();
            let sum: f64 = w.values().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
            let hi = 0.6_f64.min(0.8);
            for &v in w.values() {
                assert!(v >= 0.05 - 1e-9 && v <= hi + 1e-9, "{v} out of bounds");
            }
        }
    }

    #[test]
    fn apportion_hand_example() {
        let w = normalize_clamp(&[0.775, 0.475, 0.175, 0.475], 0.05, 0.8, 0.6).unwrap();
        let q = apportion_budget(&w, 40, 0.0).unwrap();
        assert_eq!(q.strategies, vec![16, 10, 4, 10]);
        assert_eq!(q.exploration, 0);
        assert_eq!(q.total(), 40);
    }

    #[test]
    fn apportion_uniform_and_full_exploration() {
        let w = WeightVector::uniform(4);
        let q = apportion_budget(&w, 40, 0.0).unwrap();
        assert_eq!(q.strategies, vec![10, 10, 10, 10]);
        let all_explore = apportion_budget(&w, 40, 1.0).unwrap();
        assert_eq!(all_explore.strategies, vec![0, 0, 0, 0]);
        assert_eq!(all_explore.exploration, 40);
        assert!(matches!(
            apportion_budget(&w, 0, 0.0),
            Err(ControllerError::Budget)
        ));
    }

    #[test]
    fn apportion_always_totals_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let s = rng.random_range(2..6);
            let raw: Vec<f64> = (0..s).map(|_| rng.random_range(0.01..2.0)).collect();
            let w = normalize_clamp(&raw, 0.0, 1.0, 1.0).unwrap();
            let b = rng.random_range(1..200);
            let eps = rng.random_range(0.0..=1.0);
            let q = apportion_budget(&w, b, eps).unwrap();
            assert_eq!(q.total(), b);
        }
    }

    #[test]
    fn apportion_nearly_monotone_in_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
            let b = rng.random_range(1..120);
            let w = normalize_clamp(&raw, 0.0, 1.0, 1.0).unwrap();
            let q = apportion_budget(&w, b, 0.0).unwrap();
            let mut bumped = raw.clone();
            bumped[2] += rng.random_range(0.0..1.0);
            let w2 = normalize_clamp(&bumped, 0.0, 1.0, 1.0).unwrap();
            let q2 = apportion_budget(&w2, b, 0.0).unwrap();
            assert!(
                q2.strategies[2] + 1 >= q.strategies[2],
                "raising a weight lowered its quota by more than 1"
            );
        }
    }

    #[test]
    fn anneal_endpoints_and_midpoint() {
        let config = ControllerConfig {
            total_rounds: 11,
            ..ControllerConfig::default()
        };
        let (a1, t1, e1) = anneal(&config, 1);
        assert_abs_diff_eq!(a1, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(t1, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(e1, 0.10, epsilon = 1e-12);
        let (at, tt, et) = anneal(&config, 11);
        assert_abs_diff_eq!(at, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(tt, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(et, 0.02, epsilon = 1e-12);
        let (am, tm, em) = anneal(&config, 6); // (1 + 11) / 2
        assert_abs_diff_eq!(am, 0.16, epsilon = 1e-12);
        assert_abs_diff_eq!(tm, 0.475, epsilon = 1e-12);
        assert_abs_diff_eq!(em, 0.06, epsilon = 1e-12);
    }

    #[test]
    fn anneal_single_round_returns_initial() {
        let config = ControllerConfig {
            total_rounds: 1,
            ..ControllerConfig::default()
        };
        let (a, t, e) = anneal(&config, 1);
        assert_abs_diff_eq!(a, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(e, 0.10, epsilon = 1e-12);
    }

    #[test]
    fn attribution_examples() {
        let equal = QuotaVector {
            strategies: vec![10, 10, 10, 10],
            exploration: 0,
        };
        let (omega, active) = attribute_performance(0.5, 0.6, &equal, 40);
        for &o in &omega {
            assert_abs_diff_eq!(o, 0.6, epsilon = 1e-12);
        }
        assert!(active.iter().all(|&a| a));

        let skewed = QuotaVector {
            strategies: vec![20, 20, 0, 0],
            exploration: 0,
        };
        let (omega, active) = attribute_performance(0.5, 0.6, &skewed, 40);
        assert_abs_diff_eq!(omega[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(omega[1], 0.7, epsilon = 1e-12);
        assert!(!active[2] && !active[3]);
    }

    #[test]
    fn alternating_cycles_canonical_order() {
        assert_eq!(alternating_schedule(1, 4).values(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(alternating_schedule(5, 4).values(), &[1.0, 0.0, 0.0, 0.0]);
        let mut seen = [false; 4];
        for t in 1..=4 {
            let w = alternating_schedule(t, 4);
            let hot = w.values().iter().position(|&v| v == 1.0).unwrap();
            seen[hot] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    fn fused_strategies() -> Vec<Box<dyn AcquisitionStrategy>> {
        crate::strategies::canonical_order()
            .iter()
            .map(|name| create_strategy(name).unwrap())
            .collect()
    }

    #[test]
    fn round_batch_degenerates_to_single_strategy() {
        let inputs = synthetic_inputs(12, 3);
        let strategies = fused_strategies();
        let quotas = QuotaVector {
            strategies: vec![5, 0, 0, 0],
            exploration: 0,
        };
        let fused = select_round_batch(&strategies, &inputs, &quotas, 99).unwrap();
        let direct = strategies[0]
            .select(
                &inputs.as_context(),
                5,
                seeds::derive2(99, seeds::SALT_SELECT, 0),
            )
            .unwrap();
        assert_eq!(fused.chosen, direct.chosen);
    }

    #[test]
    fn round_batch_exhausts_pool() {
        let inputs = synthetic_inputs(8, 3);
        let strategies = fused_strategies();
        let quotas = QuotaVector {
            strategies: vec![2, 2, 2, 1],
            exploration: 1,
        };
        let fused = select_round_batch(&strategies, &inputs, &quotas, 5).unwrap();
        let mut sorted = fused.chosen.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, inputs.candidates);
    }

    #[test]
    fn round_batch_never_duplicates_even_with_identical_scorers() {
        // entropy and bald see identical stacks here, so their rankings
        // coincide; dedup must still hold across random instances.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let strategies = fused_strategies();
        for _ in 0..20 {
            let n = rng.random_range(8..20);
            let inputs = synthetic_inputs(n, 4);
            let q = n / 4;
            let quotas = QuotaVector {
                strategies: vec![q, q, q, 0],
                exploration: n / 8,
            };
            let fused = select_round_batch(&strategies, &inputs, &quotas, rng.random()).unwrap();
            assert_eq!(fused.chosen.len(), quotas.total());
            let mut sorted = fused.chosen.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), quotas.total());
        }
    }

    #[test]
    fn round_batch_rejects_oversized_budget() {
        let inputs = synthetic_inputs(4, 3);
        let strategies = fused_strategies();
        let quotas = QuotaVector {
            strategies: vec![3, 2, 0, 0],
            exploration: 0,
        };
        assert!(matches!(
            select_round_batch(&strategies, &inputs, &quotas, 0),
            Err(ControllerError::Infeasible(_))
        ));
    }

    #[test]
    fn config_validation_catches_bad_bounds() {
        let bad = ControllerConfig {
            weight_floor: 0.3,
            ..ControllerConfig::default()
        };
        assert!(bad.validate().is_err()); // 0.3 * 4 > 1
        let bad = ControllerConfig {
            dominance: 0.2,
            ..ControllerConfig::default()
        };
        assert!(bad.validate().is_err()); // min(cap, dom) * S = 0.8 < 1
        let bad = ControllerConfig {
            alpha_min: 0.5,
            alpha0: 0.3,
            ..ControllerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ControllerConfig::default().validate().is_ok());
    }

    #[test]
    fn pure_cycling_regime_traces_normalized_prior() {
        let config = ControllerConfig {
            alpha0: 1.0,
            alpha_min: 1.0,
            eps0: 0.0,
            eps_min: 0.0,
            weight_floor: 0.0,
            weight_cap: 1.0,
            dominance: 1.0,
            total_rounds: 10,
            ..ControllerConfig::default()
        };
        let mut controller = WaveFuseController::new(config).unwrap();
        for t in 1..=10 {
            let plan = controller.plan_round(t, 0.42).unwrap();
            let psi = sinusoidal_prior(t, 10, 4);
            let sum: f64 = psi.iter().sum();
            for (got, want) in plan
                .weights
                .values()
                .iter()
                .zip(psi.iter().map(|p| p / sum))
            {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
            }
            let quotas = apportion_budget(&plan.weights, 8, plan.eps).unwrap();
            controller.commit_quotas(quotas, 8);
        }
    }
}
