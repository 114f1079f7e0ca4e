//! Uncertainty scores: entropy, margin, BALD, and top-k batch formation.

use super::{check_budget, ScoreVector, SelectionResult, StrategyError};
use crate::learner::{McStack, ProbMatrix};
use ndarray::Axis;

/// Natural-log entropy of a probability row; `0 ln 0` contributes 0.
fn entropy(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// Predictive entropy per sample.
pub fn entropy_scores(probs: &ProbMatrix) -> ScoreVector {
    probs
        .values()
        .rows()
        .into_iter()
        .map(|r| entropy(r.as_slice().unwrap()))
        .collect()
}

/// Negative top-two gap `-(p_(1) - p_(2))`; higher means more uncertain.
pub fn margin_scores(probs: &ProbMatrix) -> Result<ScoreVector, StrategyError> {
    if probs.n_classes() < 2 {
        return Err(StrategyError::Invalid(
            "margin needs at least 2 classes".into(),
        ));
    }
    Ok(probs
        .values()
        .rows()
        .into_iter()
        .map(|r| {
            let mut top = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for &p in r.iter() {
                if p > top {
                    second = top;
                    top = p;
                } else if p > second {
                    second = p;
                }
            }
            -(top - second)
        })
        .collect())
}

/// Mutual information between predictions and parameters estimated from an
/// MC-dropout stack: entropy of the mean prediction minus mean per-pass
/// entropy. Tiny negatives from floating-point noise are clamped to 0.
pub fn bald_scores(stack: &McStack) -> ScoreVector {
    let values = stack.values();
    let m = stack.n_passes() as f64;
    let mean = values.mean_axis(Axis(0)).expect("M >= 2");
    let mut scores = Vec::with_capacity(stack.n_samples());
    for (i, mean_row) in mean.rows().into_iter().enumerate() {
        let h_mean = entropy(mean_row.as_slice().unwrap());
        let mut mean_h = 0.0;
        for pass in values.axis_iter(Axis(0)) {
            mean_h += entropy(pass.row(i).as_slice().unwrap());
        }
        mean_h /= m;
        let mut score = h_mean - mean_h;
        if (-1e-9..0.0).contains(&score) {
            score = 0.0;
        }
        scores.push(score);
    }
    scores
}

/// Image-level BALD: the spatial mean of per-pixel BALD scores over an
/// `M × U × K` stack, U = pixel count.
pub fn bald_pixelwise(stack: &McStack) -> f64 {
    let scores = bald_scores(stack);
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// The `k` highest-scoring candidates; ties break toward the earlier
/// candidate. Chosen indices come back in descending score order.
pub fn top_k(
    scores: &[f64],
    candidates: &[usize],
    k: usize,
) -> Result<SelectionResult, StrategyError> {
    if scores.len() != candidates.len() {
        return Err(StrategyError::Invalid(format!(
            "{} scores for {} candidates",
            scores.len(),
            candidates.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(StrategyError::Invalid("scores must be finite".into()));
    }
    check_budget(k, candidates.len())?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let chosen = order[..k].iter().map(|&p| candidates[p]).collect();
    Ok(SelectionResult::new("top_k", chosen))
}
