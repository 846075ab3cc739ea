//! Two-layer fully-connected classifier with hand-written backpropagation,
//! soft-label cross-entropy, and SGD with momentum and (decoupled-from-loss)
//! L2 weight decay folded into the gradient. Double precision throughout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distr::standard_normal;
use crate::matrix::Matrix;

const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Weights and biases of the `D → H → C` network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.cols()
    }
}

/// Gradients with the same shapes as [`MlpParams`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// SGD hyperparameters plus per-tensor velocity buffers.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    v_w1: Matrix,
    v_b1: Vec<f64>,
    v_w2: Matrix,
    v_b2: Vec<f64>,
}

impl OptimizerState {
    pub fn new(
        params: &MlpParams,
        lr: f64,
        weight_decay: f64,
        momentum: f64,
    ) -> Result<Self, ModelError> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(ModelError::InvalidParam(format!("lr {lr}")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(ModelError::InvalidParam(format!(
                "weight_decay {weight_decay}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(ModelError::InvalidParam(format!("momentum {momentum}")));
        }
        Ok(OptimizerState {
            lr,
            weight_decay,
            momentum,
            v_w1: Matrix::zeros(params.w1.rows(), params.w1.cols()),
            v_b1: vec![0.0; params.b1.len()],
            v_w2: Matrix::zeros(params.w2.rows(), params.w2.cols()),
            v_b2: vec![0.0; params.b2.len()],
        })
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Matrix,
    pre_activations: Matrix,
    hidden: Matrix,
    probs: Matrix,
}

/// He-initialized parameters: weights ~ N(0, 2/fan_in), biases zero.
pub fn init_params(
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<MlpParams, ModelError> {
    if input_dim == 0 || hidden_dim == 0 || num_classes == 0 {
        return Err(ModelError::InvalidParam(format!(
            "dims ({input_dim}, {hidden_dim}, {num_classes}) must all be >= 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian_matrix = |rows: usize, cols: usize, std: f64| {
        let data = (0..rows * cols)
            .map(|_| std * standard_normal(&mut rng))
            .collect();
        Matrix::from_vec(rows, cols, data)
    };
    let w1 = gaussian_matrix(input_dim, hidden_dim, (2.0 / input_dim as f64).sqrt());
    let w2 = gaussian_matrix(hidden_dim, num_classes, (2.0 / hidden_dim as f64).sqrt());
    Ok(MlpParams {
        w1,
        b1: vec![0.0; hidden_dim],
        w2,
        b2: vec![0.0; num_classes],
    })
}

/// `softmax(relu(X·W1 + b1)·W2 + b2)` with max-subtraction for stability.
pub fn forward(params: &MlpParams, inputs: &Matrix) -> Result<(Matrix, ForwardCache), ModelError> {
    if inputs.cols() != params.input_dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "inputs have {} columns, model expects {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    let mut pre = inputs.matmul(&params.w1);
    pre.add_row_bias(&params.b1);
    let mut hidden = pre.clone();
    for v in hidden.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut logits = hidden.matmul(&params.w2);
    logits.add_row_bias(&params.b2);
    let probs = softmax_rows(&logits);
    let cache = ForwardCache {
        inputs: inputs.clone(),
        pre_activations: pre,
        hidden,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

/// Class probabilities without the backward-pass cache; what evaluation
/// loops call.
pub fn predict(params: &MlpParams, inputs: &Matrix) -> Result<Matrix, ModelError> {
    if inputs.cols() != params.input_dim() {
        return Err(ModelError::ShapeMismatch(format!(
            "inputs have {} columns, model expects {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    let mut hidden = inputs.matmul(&params.w1);
    hidden.add_row_bias(&params.b1);
    for v in hidden.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut logits = hidden.matmul(&params.w2);
    logits.add_row_bias(&params.b2);
    Ok(softmax_rows(&logits))
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean over the batch of `-Σ_c y_c · ln(p_c + 1e-12)`.
pub fn soft_ce_loss(probs: &Matrix, soft_labels: &Matrix) -> Result<f64, ModelError> {
    if probs.rows() != soft_labels.rows() || probs.cols() != soft_labels.cols() {
        return Err(ModelError::ShapeMismatch(format!(
            "probs {}x{} vs labels {}x{}",
            probs.rows(),
            probs.cols(),
            soft_labels.rows(),
            soft_labels.cols()
        )));
    }
    let n = probs.rows().max(1);
    let total: f64 = probs
        .data()
        .iter()
        .zip(soft_labels.data())
        .map(|(&p, &y)| if y != 0.0 { -y * (p + LOG_EPS).ln() } else { 0.0 })
        .sum();
    Ok(total / n as f64)
}

/// Exact gradients of [`soft_ce_loss`] after [`forward`]; the output-layer
/// error term is `(probs − labels) / N`.
pub fn backward(
    params: &MlpParams,
    cache: &ForwardCache,
    soft_labels: &Matrix,
) -> Result<Gradients, ModelError> {
    let n = cache.probs.rows();
    if soft_labels.rows() != n || soft_labels.cols() != cache.probs.cols() {
        return Err(ModelError::ShapeMismatch(format!(
            "labels {}x{} vs probs {}x{}",
            soft_labels.rows(),
            soft_labels.cols(),
            n,
            cache.probs.cols()
        )));
    }
    if cache.inputs.cols() != params.input_dim() || cache.hidden.cols() != params.hidden_dim() {
        return Err(ModelError::ShapeMismatch(
            "cache does not match model dimensions".into(),
        ));
    }

    let inv_n = 1.0 / n.max(1) as f64;
    let mut d_logits = cache.probs.clone();
    for (d, &y) in d_logits.data_mut().iter_mut().zip(soft_labels.data()) {
        *d = (*d - y) * inv_n;
    }

    let g_w2 = cache.hidden.t_matmul(&d_logits);
    let g_b2 = d_logits.col_sums();

    let mut d_hidden = d_logits.matmul_t(&params.w2);
    for (d, &z) in d_hidden.data_mut().iter_mut().zip(cache.pre_activations.data()) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    let g_w1 = cache.inputs.t_matmul(&d_hidden);
    let g_b1 = d_hidden.col_sums();

    Ok(Gradients {
        w1: g_w1,
        b1: g_b1,
        w2: g_w2,
        b2: g_b2,
    })
}

/// One SGD step: `g ← g + wd·w` (weights only), `v ← momentum·v + g`,
/// `w ← w − lr·v`.
pub fn sgd_step(
    params: &mut MlpParams,
    grads: &Gradients,
    opt: &mut OptimizerState,
) -> Result<(), ModelError> {
    if params.w1.rows() != grads.w1.rows()
        || params.w1.cols() != grads.w1.cols()
        || params.w2.rows() != grads.w2.rows()
        || params.w2.cols() != grads.w2.cols()
        || params.b1.len() != grads.b1.len()
        || params.b2.len() != grads.b2.len()
    {
        return Err(ModelError::ShapeMismatch(
            "gradient shapes do not match parameters".into(),
        ));
    }

    let lr = opt.lr;
    let momentum = opt.momentum;
    let wd = opt.weight_decay;

    let update_weights = |w: &mut [f64], g: &[f64], v: &mut [f64]| {
        for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            let g = g + wd * *w;
            *v = momentum * *v + g;
            *w -= lr * *v;
        }
    };
    update_weights(params.w1.data_mut(), grads.w1.data(), opt.v_w1.data_mut());
    update_weights(params.w2.data_mut(), grads.w2.data(), opt.v_w2.data_mut());

    let update_biases = |b: &mut [f64], g: &[f64], v: &mut [f64]| {
        for ((b, &g), v) in b.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = momentum * *v + g;
            *b -= lr * *v;
        }
    };
    update_biases(&mut params.b1, &grads.b1, &mut opt.v_b1);
    update_biases(&mut params.b2, &grads.b2, &mut opt.v_b2);
    Ok(())
}

/// Fraction of rows whose argmax (ties to the lowest index) matches the hard
/// label.
pub fn accuracy(probs: &Matrix, hard_labels: &[usize]) -> Result<f64, ModelError> {
    if probs.rows() != hard_labels.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} prob rows vs {} labels",
            probs.rows(),
            hard_labels.len()
        )));
    }
    if probs.rows() == 0 {
        return Ok(0.0);
    }
    let correct = probs
        .iter_rows()
        .zip(hard_labels)
        .filter(|(row, &label)| argmax_first(row) == label)
        .count();
    Ok(correct as f64 / probs.rows() as f64)
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
