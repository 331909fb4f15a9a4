//! Softmax cross-entropy, backpropagation and the SGD / momentum / Adam
//! optimizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{argmax, labels_of, LayerParams, Mlp};
use crate::numerics::{gemm_nn, gemm_tn, DenseMatrix, SeededRng};

/// Gradient of the loss with respect to every parameter of a network,
/// laid out exactly like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerParams::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    fn congruent_with(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers().len()
            && self
                .layers
                .iter()
                .zip(net.layers())
                .all(|(g, p)| g.out_dim() == p.out_dim() && g.in_dim() == p.in_dim())
    }
}

/// Mean softmax cross-entropy of `net` on a batch and its gradient.
pub fn loss_and_grad(net: &Mlp, batch_x: &DenseMatrix, batch_y: &[usize]) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(net);
    let (loss, _) = loss_and_grad_into(net, batch_x, batch_y, &mut grads)?;
    Ok((loss, grads))
}

/// As [`loss_and_grad`], writing into a reused buffer. Also returns the
/// number of correctly classified rows (pre-update).
fn loss_and_grad_into(
    net: &Mlp,
    batch_x: &DenseMatrix,
    batch_y: &[usize],
    grads: &mut Gradients,
) -> Result<(f64, usize)> {
    let n = batch_x.rows();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if batch_y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: batch_y.len(),
        });
    }
    if batch_x.cols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: batch_x.cols(),
        });
    }
    let classes = net.output_dim();
    if let Some(&bad) = batch_y.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} outputs")));
    }

    // Forward, keeping every layer's output (post-ReLU for hidden layers).
    let layers = net.layers();
    let mut outputs: Vec<DenseMatrix> = Vec::with_capacity(layers.len());
    for (idx, layer) in layers.iter().enumerate() {
        let input = if idx == 0 { batch_x } else { &outputs[idx - 1] };
        let mut z = DenseMatrix::zeros(n, layer.out_dim());
        crate::numerics::gemm_nt(input, &layer.weights, &mut z, 0.0);
        for r in 0..n {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
                *v += b;
            }
        }
        if idx + 1 < layers.len() {
            for v in z.as_mut_slice() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        outputs.push(z);
    }

    // Softmax cross-entropy; delta = (softmax - onehot) / n.
    let mut delta = outputs.pop().expect("at least one layer");
    let mut loss = 0.0;
    let mut correct = 0;
    let inv_n = 1.0 / n as f64;
    for (r, &y) in batch_y.iter().enumerate() {
        let row = delta.row_mut(r);
        if argmax(row) == y {
            correct += 1;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let target_shifted = row[y] - max;
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loss += sum.ln() - target_shifted;
        for v in row.iter_mut() {
            *v /= sum;
        }
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v *= inv_n;
        }
    }
    let loss = loss * inv_n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }

    for idx in (0..layers.len()).rev() {
        let input = if idx == 0 { batch_x } else { &outputs[idx - 1] };
        let g = &mut grads.layers[idx];
        gemm_tn(&delta, input, &mut g.weights, 0.0);
        g.biases.iter_mut().for_each(|b| *b = 0.0);
        for r in 0..n {
            for (b, d) in g.biases.iter_mut().zip(delta.row(r)) {
                *b += d;
            }
        }
        if idx > 0 {
            let mut back = DenseMatrix::zeros(n, layers[idx].in_dim());
            gemm_nn(&delta, &layers[idx].weights, &mut back, 0.0);
            // ReLU subgradient: zero where the unit was inactive (including exactly 0).
            for (d, &a) in back.as_mut_slice().iter_mut().zip(input.as_slice()) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = back;
        }
    }
    Ok((loss, correct))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd,
    Momentum {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerKind {
    pub fn momentum() -> Self {
        OptimizerKind::Momentum {
            momentum: default_momentum(),
        }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            OptimizerKind::Sgd => "sgd".into(),
            OptimizerKind::Momentum { momentum } => format!("momentum({momentum})"),
            OptimizerKind::Adam { beta1, beta2, epsilon } => format!("adam({beta1},{beta2},{epsilon:e})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        match *self {
            OptimizerKind::Sgd => Ok(()),
            OptimizerKind::Momentum { momentum } if unit(momentum) => Ok(()),
            OptimizerKind::Momentum { .. } => Err(Error::invalid("momentum must lie in [0, 1)")),
            OptimizerKind::Adam { beta1, beta2, epsilon } if unit(beta1) && unit(beta2) && epsilon > 0.0 => Ok(()),
            OptimizerKind::Adam { .. } => Err(Error::invalid("adam needs beta1, beta2 in [0, 1) and epsilon > 0")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self { kind, learning_rate }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and > 0"));
        }
        self.kind.validate()
    }
}

/// Per-parameter optimizer buffers, congruent to the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    step: u64,
    beta1_power: f64,
    beta2_power: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Mlp, kind: &OptimizerKind) -> Self {
        let sizes: Vec<usize> = net
            .layers()
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.biases.len())
            .collect();
        let buffers = || sizes.iter().map(|&s| vec![0.0; s]).collect::<Vec<_>>();
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Momentum { .. } => (buffers(), Vec::new()),
            OptimizerKind::Adam { .. } => (buffers(), buffers()),
        };
        Self {
            step: 0,
            beta1_power: 1.0,
            beta2_power: 1.0,
            first,
            second,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn congruent_with(&self, net: &Mlp, kind: &OptimizerKind) -> bool {
        let sizes = net
            .layers()
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.biases.len());
        let check = |bufs: &Vec<Vec<f64>>| bufs.len() == net.layers().len() && bufs.iter().zip(sizes.clone()).all(|(b, s)| b.len() == s);
        match kind {
            OptimizerKind::Sgd => true,
            OptimizerKind::Momentum { .. } => check(&self.first),
            OptimizerKind::Adam { .. } => check(&self.first) && check(&self.second),
        }
    }
}

/// One parameter update.
///
/// - SGD: `p ← p − lr·g`
/// - Momentum: `v ← μ·v − lr·g; p ← p + v`
/// - Adam: bias-corrected moments, `p ← p − lr·m̂ / (√v̂ + ε)`
pub fn optimizer_step(state: &mut OptimizerState, net: &mut Mlp, grads: &Gradients, spec: &OptimizerSpec) -> Result<()> {
    if !grads.congruent_with(net) || !state.congruent_with(net, &spec.kind) {
        return Err(Error::invalid("optimizer state or gradients not congruent with network"));
    }
    let lr = spec.learning_rate;
    state.step += 1;
    if let OptimizerKind::Adam { beta1, beta2, .. } = spec.kind {
        state.beta1_power *= beta1;
        state.beta2_power *= beta2;
    }
    for (idx, (layer, grad)) in net.layers_mut().iter_mut().zip(&grads.layers).enumerate() {
        let w_len = layer.weights.rows() * layer.weights.cols();
        let parts: [(&mut [f64], &[f64], usize); 2] = [
            (layer.weights.as_mut_slice(), grad.weights.as_slice(), 0),
            (&mut layer.biases, &grad.biases, w_len),
        ];
        for (params, g, offset) in parts {
            match spec.kind {
                OptimizerKind::Sgd => {
                    for (p, &gi) in params.iter_mut().zip(g) {
                        *p -= lr * gi;
                    }
                }
                OptimizerKind::Momentum { momentum } => {
                    let v = &mut state.first[idx][offset..offset + params.len()];
                    for ((p, vi), &gi) in params.iter_mut().zip(v.iter_mut()).zip(g) {
                        *vi = momentum * *vi - lr * gi;
                        *p += *vi;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, epsilon } => {
                    let c1 = 1.0 - state.beta1_power;
                    let c2 = 1.0 - state.beta2_power;
                    let m = &mut state.first[idx][offset..offset + params.len()];
                    let v = &mut state.second[idx][offset..offset + params.len()];
                    for (((p, mi), vi), &gi) in params.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub shuffle_each_epoch: bool,
    #[serde(default)]
    pub seed: u64,
    /// Evaluate validation accuracy every this many epochs; the final epoch
    /// is always evaluated.
    #[serde(default = "default_one")]
    pub validation_interval: usize,
}

fn default_true() -> bool {
    true
}
fn default_one() -> usize {
    1
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            shuffle_each_epoch: true,
            seed: 0,
            validation_interval: 1,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.validation_interval == 0 {
            return Err(Error::invalid("validation_interval must be at least 1"));
        }
        Ok(())
    }
}

/// Labelled examples borrowed from a dataset.
#[derive(Clone, Copy, Debug)]
pub struct Examples<'a> {
    pub inputs: &'a DenseMatrix,
    pub labels: &'a [usize],
}

impl<'a> Examples<'a> {
    pub fn new(inputs: &'a DenseMatrix, labels: &'a [usize]) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        Ok(Self { inputs, labels })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub train_loss: f64,
    /// Fraction of training rows classified correctly before each update.
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: Mlp,
    pub history: Vec<EpochRecord>,
}

/// Fraction of rows whose predicted label matches.
pub fn accuracy(net: &Mlp, data: Examples<'_>) -> Result<f64> {
    if data.labels.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let predicted = labels_of(&net.forward_batch(data.inputs, None)?);
    let hits = predicted.iter().zip(data.labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / data.labels.len() as f64)
}

/// Mini-batch training from `initial`. Shuffle order derives from `spec.seed`.
pub fn train(
    initial: &Mlp,
    data: Examples<'_>,
    validation: Option<Examples<'_>>,
    spec: &TrainSpec,
    optimizer: &OptimizerSpec,
) -> Result<TrainOutcome> {
    spec.validate()?;
    optimizer.validate()?;
    let n = data.labels.len();
    if n == 0 {
        return Err(Error::invalid("training set is empty"));
    }
    let mut net = initial.clone();
    let mut state = OptimizerState::new(&net, &optimizer.kind);
    let mut grads = Gradients::zeros_like(&net);
    let mut rng = SeededRng::new(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(spec.epochs);

    for epoch in 1..=spec.epochs {
        if spec.shuffle_each_epoch {
            rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(spec.batch_size) {
            let bx = data.inputs.select_rows(chunk);
            let by: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let (loss, hits) = match loss_and_grad_into(&net, &bx, &by, &mut grads) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            loss_sum += loss * chunk.len() as f64;
            correct += hits;
            optimizer_step(&mut state, &mut net, &grads, optimizer)?;
        }
        if !net.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_acc = match validation {
            Some(v) if epoch % spec.validation_interval == 0 || epoch == spec.epochs => {
                Some(accuracy(&net, v).map_err(|e| match e {
                    Error::NonFinite(_) => Error::Diverged { epoch },
                    other => other,
                })?)
            }
            _ => None,
        };
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            train_acc: correct as f64 / n as f64,
            val_acc,
        });
    }
    Ok(TrainOutcome { net, history })
}
