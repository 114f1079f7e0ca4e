//! Evaluation metrics: accuracy, F1, Dice and IoU.

use ndarray::Array2;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("length mismatch: {a} predictions vs {b} labels")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty inputs")]
    Empty,
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("masks must be binary")]
    NonBinaryMask,
}

/// Exact-match fraction.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            a: preds.len(),
            b: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

fn per_class_f1(preds: &[usize], labels: &[usize], class: usize) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in preds.iter().zip(labels) {
        match (p == class, l == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        // class absent in both predictions and labels
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of per-class F1 over all `k` classes. A class absent in
/// both predictions and labels contributes F1 = 0.
pub fn macro_f1(preds: &[usize], labels: &[usize], k: usize) -> Result<f64, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            a: preds.len(),
            b: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let sum: f64 = (0..k).map(|c| per_class_f1(preds, labels, c)).sum();
    Ok(sum / k as f64)
}

/// F1 for the positive class (label 1) of a binary problem.
pub fn positive_f1(preds: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            a: preds.len(),
            b: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(per_class_f1(preds, labels, 1))
}

fn mask_counts(a: &Array2<u8>, b: &Array2<u8>) -> Result<(usize, usize, usize), MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::ShapeMismatch {
            a: a.dim(),
            b: b.dim(),
        });
    }
    if a.iter().chain(b.iter()).any(|&v| v > 1) {
        return Err(MetricError::NonBinaryMask);
    }
    let mut inter = 0usize;
    let mut card_a = 0usize;
    let mut card_b = 0usize;
    for (&x, &y) in a.iter().zip(b.iter()) {
        inter += (x & y) as usize;
        card_a += x as usize;
        card_b += y as usize;
    }
    Ok((inter, card_a, card_b))
}

/// Dice overlap `2|A∩B| / (|A| + |B|)`; 1.0 when both masks are empty.
pub fn dice(a: &Array2<u8>, b: &Array2<u8>) -> Result<f64, MetricError> {
    let (inter, ca, cb) = mask_counts(a, b)?;
    if ca + cb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (ca + cb) as f64)
}

/// Jaccard overlap `|A∩B| / |A∪B|`; 1.0 when both masks are empty.
pub fn iou(a: &Array2<u8>, b: &Array2<u8>) -> Result<f64, MetricError> {
    let (inter, ca, cb) = mask_counts(a, b)?;
    let union = ca + cb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
