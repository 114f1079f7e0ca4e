//! Greedy k-center (farthest-first traversal).
//!
//! Exact k-center is NP-hard; farthest-first gives the classic factor-2
//! approximation of the optimal covering radius.

use super::{check_budget, SelectionResult, StrategyError};
use ndarray::ArrayView2;

fn sq_dist(a: &ArrayView2<f64>, i: usize, b: &ArrayView2<f64>, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Picks `b` unlabeled points by repeatedly taking the point farthest from
/// the nearest center in `labeled ∪ chosen`. Returned indices are
/// positions into `unlabeled`. Diagnostics carry `covering_radius`, the
/// final max-min distance from any unlabeled point to a center.
///
/// With an empty labeled set the first pick is position 0 by convention.
pub fn kcenter_select(
    labeled: &ArrayView2<f64>,
    unlabeled: &ArrayView2<f64>,
    b: usize,
) -> Result<SelectionResult, StrategyError> {
    let n = unlabeled.nrows();
    check_budget(b, n)?;
    if labeled.nrows() > 0 && labeled.ncols() != unlabeled.ncols() {
        return Err(StrategyError::Invalid(format!(
            "embedding widths differ: {} vs {}",
            labeled.ncols(),
            unlabeled.ncols()
        )));
    }

    // min squared distance of every unlabeled point to the center set
    let mut min_sq: Vec<f64> = (0..n)
        .map(|i| {
            (0..labeled.nrows())
                .map(|j| sq_dist(unlabeled, i, labeled, j))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut chosen = Vec::with_capacity(b);
    for _ in 0..b {
        let pick = if labeled.nrows() == 0 && chosen.is_empty() {
            0
        } else {
            let mut best = 0;
            for i in 1..n {
                if min_sq[i] > min_sq[best] {
                    best = i;
                }
            }
            best
        };
        chosen.push(pick);
        for (i, nearest) in min_sq.iter_mut().enumerate() {
            let d = sq_dist(unlabeled, i, unlabeled, pick);
            if d < *nearest {
                *nearest = d;
            }
        }
    }

    let radius = min_sq.iter().cloned().fold(0.0_f64, f64::max).sqrt();
    let mut result = SelectionResult::new("coreset", chosen);
    result.diagnostics.insert("covering_radius".into(), radius);
    Ok(result)
}
