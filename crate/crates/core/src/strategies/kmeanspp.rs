//! k-means++ D² seeding as a batch selector.
//!
//! Seeding only, no Lloyd iterations: the first center is uniform, each
//! further center is sampled with probability proportional to the squared
//! distance to its nearest chosen center. Applied to gradient embeddings
//! this is the BADGE acquisition rule.

use super::{check_budget, SelectionResult, StrategyError};
use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sq_dist(points: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(points.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Selects `b` row positions of `points` by D² seeding. When the residual
/// D² mass vanishes (all remaining points coincide with a chosen center)
/// the batch is completed with the lowest unchosen positions.
pub fn kmeanspp_select(
    points: &ArrayView2<f64>,
    b: usize,
    seed: u64,
) -> Result<SelectionResult, StrategyError> {
    let n = points.nrows();
    check_budget(b, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(b);
    if b == 0 {
        return Ok(SelectionResult::new("kmeanspp", chosen));
    }

    let first = rng.random_range(0..n);
    chosen.push(first);
    let mut min_sq: Vec<f64> = (0..n).map(|i| sq_dist(points, i, first)).collect();
    let mut taken = vec![false; n];
    taken[first] = true;

    while chosen.len() < b {
        let total: f64 = min_sq
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(&d, _)| d)
            .sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for i in 0..n {
                if taken[i] {
                    continue;
                }
                cum += min_sq[i];
                if cum > r {
                    pick = Some(i);
                    break;
                }
            }
            // r can land on the open upper edge; fall back to the last
            // point with positive mass.
            pick.unwrap_or_else(|| {
                (0..n)
                    .rev()
                    .find(|&i| !taken[i] && min_sq[i] > 0.0)
                    .expect("positive total mass")
            })
        } else {
            // degenerate: distinct-index fill
            (0..n).find(|&i| !taken[i]).expect("b <= n")
        };
        chosen.push(next);
        taken[next] = true;
        for (i, nearest) in min_sq.iter_mut().enumerate() {
            let d = sq_dist(points, i, next);
            if d < *nearest {
                *nearest = d;
            }
        }
    }
    Ok(SelectionResult::new("kmeanspp", chosen))
}

/// BADGE: k-means++ seeding over gradient embeddings (classification) or
/// pooled embeddings (segmentation). Positions into the embedding rows.
pub fn badge_select(
    gradient_embeddings: &ArrayView2<f64>,
    b: usize,
    seed: u64,
) -> Result<SelectionResult, StrategyError> {
    let mut result = kmeanspp_select(gradient_embeddings, b, seed)?;
    result.strategy = "badge".to_string();
    Ok(result)
}
