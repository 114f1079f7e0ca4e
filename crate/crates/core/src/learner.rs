//! Desk-scale probabilistic classifier.
//!
//! A one-hidden-layer MLP (ReLU, softmax output, dropout on the hidden
//! activations) trained by minibatch SGD on cross-entropy plus L2. It is
//! deliberately the smallest architecture with a genuine penultimate layer,
//! so it supplies everything the acquisition strategies consume: class
//! probabilities, MC-dropout probability stacks, penultimate embeddings,
//! and per-sample gradient embeddings.

use crate::dataset::Dataset;
use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum LearnerError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Parameters of the one-hidden-layer MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `d × D` input-to-hidden weights.
    pub w1: Array2<f64>,
    /// Hidden biases, length `D`.
    pub b1: Array1<f64>,
    /// `D × K` hidden-to-output weights.
    pub w2: Array2<f64>,
    /// Output biases, length `K`.
    pub b2: Array1<f64>,
    /// Dropout probability on hidden activations, in `[0, 1)`.
    pub dropout_p: f64,
}

impl MlpParams {
    pub fn n_inputs(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.ncols()
    }
}

/// Training configuration. `hidden_dim` and `dropout_p` fix the
/// architecture; the rest drives SGD.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            dropout_p: 0.25,
            learning_rate: 0.1,
            epochs: 60,
            minibatch: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), LearnerError> {
        if self.hidden_dim == 0 {
            return Err(LearnerError::Config("hidden_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(LearnerError::Config("dropout_p must be in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnerError::Config("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(LearnerError::Config("epochs must be >= 1".into()));
        }
        if self.minibatch == 0 {
            return Err(LearnerError::Config("minibatch must be >= 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(LearnerError::Config("l2 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-sample class probabilities; every row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    values: Array2<f64>,
}

impl ProbMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self, LearnerError> {
        for (i, row) in values.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(LearnerError::Config(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(LearnerError::Config(format!(
                    "row {i} has entries outside [0,1]"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }
}

/// `M × n × K` stack of class probabilities from M stochastic passes.
#[derive(Debug, Clone, PartialEq)]
pub struct McStack {
    values: Array3<f64>,
}

impl McStack {
    pub fn new(values: Array3<f64>) -> Result<Self, LearnerError> {
        if values.dim().0 < 2 {
            return Err(LearnerError::Config("MC stack needs M >= 2 passes".into()));
        }
        for pass in values.axis_iter(Axis(0)) {
            for row in pass.rows() {
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(LearnerError::Config(
                        "MC stack rows must be distributions".into(),
                    ));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn n_passes(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_samples(&self) -> usize {
        self.values.dim().1
    }
}

/// Penultimate-layer embeddings, `n × D`.
pub type EmbeddingMatrix = Array2<f64>;
/// Flattened gradient embeddings, `n × K·D`.
pub type GradEmbMatrix = Array2<f64>;

fn check_width(params: &MlpParams, features: &ArrayView2<f64>) -> Result<(), LearnerError> {
    if features.ncols() != params.n_inputs() {
        return Err(LearnerError::Shape {
            expected: format!("{} feature columns", params.n_inputs()),
            got: format!("{}", features.ncols()),
        });
    }
    Ok(())
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Row-wise softmax, stabilized by subtracting the row max.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Bernoulli keep mask scaled by `1/(1-p)` (inverted dropout). `p = 0`
/// yields an all-ones mask.
pub fn dropout_mask(rng: &mut ChaCha8Rng, n: usize, d: usize, p: f64) -> Array2<f64> {
    if p == 0.0 {
        return Array2::ones((n, d));
    }
    let scale = 1.0 / (1.0 - p);
    Array2::from_shape_fn(
        (n, d),
        |_| {
            if rng.random::<f64>() < p {
                0.0
            } else {
                scale
            }
        },
    )
}

/// Gradients of the training loss with respect to all parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Mean cross-entropy plus `0.5 * l2 * (|W1|^2 + |W2|^2)` and its analytic
/// gradient. An optional dropout mask (already scaled) is applied to the
/// hidden activations; the gradient is taken through it.
pub fn loss_and_grad(
    params: &MlpParams,
    features: &ArrayView2<f64>,
    labels: &[usize],
    l2: f64,
    mask: Option<&Array2<f64>>,
) -> Result<(f64, Gradients), LearnerError> {
    check_width(params, features)?;
    let n = features.nrows();
    let pre = features.dot(&params.w1) + &params.b1;
    let mut hidden = relu(&pre);
    if let Some(m) = mask {
        hidden *= m;
    }
    let logits = hidden.dot(&params.w2) + &params.b2;
    let probs = softmax_rows(&logits);

    // cross-entropy via logsumexp: finite whenever the logits are finite
    let mut ce = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        ce += lse - logits[[i, y]];
    }
    ce /= n as f64;
    let reg = 0.5
        * l2
        * (params.w1.iter().map(|w| w * w).sum::<f64>()
            + params.w2.iter().map(|w| w * w).sum::<f64>());
    let loss = ce + reg;

    // dL/dlogits = (P - Y) / n
    let mut dlogits = probs;
    for (i, &y) in labels.iter().enumerate() {
        dlogits[[i, y]] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v / n as f64);

    let gw2 = hidden.t().dot(&dlogits) + &(l2 * &params.w2);
    let gb2 = dlogits.sum_axis(Axis(0));
    let mut dhidden = dlogits.dot(&params.w2.t());
    if let Some(m) = mask {
        dhidden *= m;
    }
    let dpre = dhidden * pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let gw1 = features.t().dot(&dpre) + &(l2 * &params.w1);
    let gb1 = dpre.sum_axis(Axis(0));

    Ok((
        loss,
        Gradients {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
        },
    ))
}

fn init_params(d: usize, k: usize, config: &TrainConfig, rng: &mut ChaCha8Rng) -> MlpParams {
    let dim = config.hidden_dim;
    let a1 = (6.0 / (d + dim) as f64).sqrt();
    let a2 = (6.0 / (dim + k) as f64).sqrt();
    let w1 = Array2::from_shape_fn((d, dim), |_| rng.random_range(-a1..a1));
    let w2 = Array2::from_shape_fn((dim, k), |_| rng.random_range(-a2..a2));
    MlpParams {
        w1,
        b1: Array1::zeros(dim),
        w2,
        b2: Array1::zeros(k),
        dropout_p: config.dropout_p,
    }
}

/// Trains the MLP from scratch on the given labeled subset. Deterministic
/// for a fixed seed.
pub fn train(
    dataset: &Dataset,
    labeled_indices: &[usize],
    config: &TrainConfig,
) -> Result<MlpParams, LearnerError> {
    config.validate()?;
    if labeled_indices.is_empty() {
        return Err(LearnerError::Config(
            "need at least one labeled sample".into(),
        ));
    }
    let features = dataset.rows(labeled_indices);
    let labels = dataset.labels_for(labeled_indices);
    let n = features.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(dataset.n_features(), dataset.n_classes(), config, &mut rng);

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        // deterministic shuffle per epoch
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(config.minibatch) {
            let xb = features.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let mask = if params.dropout_p > 0.0 {
                Some(dropout_mask(
                    &mut rng,
                    xb.nrows(),
                    params.hidden_dim(),
                    params.dropout_p,
                ))
            } else {
                None
            };
            let (_, grads) = loss_and_grad(&params, &xb.view(), &yb, config.l2, mask.as_ref())?;
            let lr = config.learning_rate;
            params.w1 -= &(lr * &grads.w1);
            params.b1 -= &(lr * &grads.b1);
            params.w2 -= &(lr * &grads.w2);
            params.b2 -= &(lr * &grads.b2);
        }
        let (loss, _) = loss_and_grad(&params, &features.view(), &labels, config.l2, None)?;
        if !loss.is_finite() {
            return Err(LearnerError::Divergence { epoch });
        }
    }
    Ok(params)
}

/// Deterministic class probabilities (dropout off).
pub fn predict_proba(
    params: &MlpParams,
    features: &ArrayView2<f64>,
) -> Result<ProbMatrix, LearnerError> {
    check_width(params, features)?;
    let hidden = relu(&(features.dot(&params.w1) + &params.b1));
    let probs = softmax_rows(&(hidden.dot(&params.w2) + &params.b2));
    ProbMatrix::new(probs)
}

/// `M` stochastic forward passes with independent inverted-dropout masks
/// on the hidden layer. With `dropout_p = 0` every pass equals
/// [`predict_proba`] exactly.
pub fn mc_dropout_predict(
    params: &MlpParams,
    features: &ArrayView2<f64>,
    m: usize,
    seed: u64,
) -> Result<McStack, LearnerError> {
    if m < 2 {
        return Err(LearnerError::Config(format!(
            "MC dropout needs M >= 2, got {m}"
        )));
    }
    check_width(params, features)?;
    let n = features.nrows();
    let k = params.n_classes();
    let hidden = relu(&(features.dot(&params.w1) + &params.b1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stack = Array3::zeros((m, n, k));
    for pass in 0..m {
        let mask = dropout_mask(&mut rng, n, params.hidden_dim(), params.dropout_p);
        let dropped = &hidden * &mask;
        let probs = softmax_rows(&(dropped.dot(&params.w2) + &params.b2));
        stack.index_axis_mut(Axis(0), pass).assign(&probs);
    }
    McStack::new(stack)
}

/// Post-activation hidden layer, dropout off: the `n × D` penultimate
/// embedding h(X).
pub fn penultimate_embeddings(
    params: &MlpParams,
    features: &ArrayView2<f64>,
) -> Result<EmbeddingMatrix, LearnerError> {
    check_width(params, features)?;
    Ok(relu(&(features.dot(&params.w1) + &params.b1)))
}

/// Index of the row maximum; ties go to the lower class index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-sample last-layer loss gradient under the pseudo-label: row i is
/// the flattened outer product `(one_hot(argmax f(x_i)) - f(x_i)) ⊗ h(x_i)`
/// laid out class-major, shape `n × K·D`.
pub fn gradient_embeddings(
    params: &MlpParams,
    features: &ArrayView2<f64>,
) -> Result<GradEmbMatrix, LearnerError> {
    let probs = predict_proba(params, features)?;
    let hidden = penultimate_embeddings(params, features)?;
    let n = features.nrows();
    let k = params.n_classes();
    let dim = params.hidden_dim();
    let mut out = Array2::zeros((n, k * dim));
    for i in 0..n {
        let row = probs.values().row(i);
        let pseudo = argmax_row(row.as_slice().unwrap());
        for c in 0..k {
            let coeff = if c == pseudo { 1.0 - row[c] } else { -row[c] };
            for j in 0..dim {
                out[[i, c * dim + j]] = coeff * hidden[[i, j]];
            }
        }
    }
    Ok(out)
}

/// Channel-wise spatial mean of a `D × H × W` feature map.
pub fn global_average_pool(feature_map: &Array3<f64>) -> Array1<f64> {
    let (d, h, w) = feature_map.dim();
    let mut out = Array1::zeros(d);
    for c in 0..d {
        out[c] = feature_map.index_axis(Axis(0), c).sum() / (h * w) as f64;
    }
    out
}
