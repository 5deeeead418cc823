//! Classical trainable pieces: affine maps, the tanh decoder MLP, softmax
//! cross-entropy, Adam, the cosine schedule, gradient clipping and the Elman
//! recurrent baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QlamError, Result};

/// A named, shaped view of one parameter array.
#[derive(Clone, Debug)]
pub struct ParamView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// A fixed, ordered collection of named parameter arrays. The order returned by
/// [`ParamSet::arrays`] and [`ParamSet::arrays_mut`] must agree.
pub trait ParamSet {
    fn arrays(&self) -> Vec<ParamView<'_>>;
    fn arrays_mut(&mut self) -> Vec<&mut [f64]>;

    fn n_params(&self) -> usize {
        self.arrays().iter().map(|a| a.data.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.arrays()
            .iter()
            .flat_map(|a| a.data.iter().copied())
            .collect()
    }

    fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(QlamError::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut offset = 0;
        for arr in self.arrays_mut() {
            arr.copy_from_slice(&flat[offset..offset + arr.len()]);
            offset += arr.len();
        }
        Ok(())
    }

    fn fill(&mut self, value: f64) {
        for arr in self.arrays_mut() {
            arr.fill(value);
        }
    }

    fn all_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|a| a.data.iter().all(|v| v.is_finite()))
    }
}

fn uniform_fill<R: Rng + ?Sized>(rng: &mut R, data: &mut [f64], bound: f64) {
    for v in data {
        *v = rng.random_range(-bound..=bound);
    }
}

/// `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights and bias drawn from `U(-1/√in, 1/√in)`.
    pub fn init<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let mut a = Self::zeros(out_dim, in_dim);
        let bound = 1.0 / (in_dim as f64).sqrt();
        uniform_fill(rng, &mut a.weights, bound);
        uniform_fill(rng, &mut a.bias, bound);
        a
    }

    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(y.len(), self.out_dim);
        for (o, (row, b)) in self
            .weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .enumerate()
        {
            y[o] = b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.out_dim];
        self.forward(x, &mut y);
        y
    }

    /// Accumulates parameter gradients into `grad` and, when given, adds the
    /// input gradient into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Affine, dx: Option<&mut [f64]>) {
        for (o, &g) in dy.iter().enumerate() {
            grad.bias[o] += g;
            let row = &mut grad.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for (w, xi) in row.iter_mut().zip(x) {
                *w += g * xi;
            }
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }

    pub(crate) fn views<'a>(&'a self, prefix: &str) -> [ParamView<'a>; 2] {
        [
            ParamView {
                name: format!("{prefix}.weight"),
                shape: vec![self.out_dim, self.in_dim],
                data: &self.weights,
            },
            ParamView {
                name: format!("{prefix}.bias"),
                shape: vec![self.out_dim],
                data: &self.bias,
            },
        ]
    }

    pub(crate) fn views_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

/// Two-layer perceptron `out = B · tanh(A · x + a) + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Affine,
    pub output: Affine,
}

/// Hidden activations kept from [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    pub hidden: Vec<f64>,
}

impl Mlp {
    pub fn zeros(in_dim: usize, hidden_dim: usize, out_dim: usize) -> Self {
        Self {
            hidden: Affine::zeros(hidden_dim, in_dim),
            output: Affine::zeros(out_dim, hidden_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: Affine::init(hidden_dim, in_dim, rng),
            output: Affine::init(out_dim, hidden_dim, rng),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim
    }

    pub fn forward(&self, x: &[f64], cache: &mut MlpCache) -> Vec<f64> {
        cache.hidden.resize(self.hidden.out_dim, 0.0);
        self.hidden.forward(x, &mut cache.hidden);
        for h in cache.hidden.iter_mut() {
            *h = h.tanh();
        }
        self.output.apply(&cache.hidden)
    }

    pub fn backward(
        &self,
        x: &[f64],
        cache: &MlpCache,
        dy: &[f64],
        grad: &mut Mlp,
        dx: Option<&mut [f64]>,
    ) {
        let mut dh = vec![0.0; self.hidden.out_dim];
        self.output
            .backward(&cache.hidden, dy, &mut grad.output, Some(&mut dh));
        for (d, h) in dh.iter_mut().zip(&cache.hidden) {
            *d *= 1.0 - h * h;
        }
        self.hidden.backward(x, &dh, &mut grad.hidden, dx);
    }

    pub(crate) fn views<'a>(&'a self, prefix: &str) -> Vec<ParamView<'a>> {
        let mut v = self.hidden.views(&format!("{prefix}.hidden")).to_vec();
        v.extend(self.output.views(&format!("{prefix}.output")));
        v
    }

    pub(crate) fn views_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.hidden.views_mut().into_iter().collect();
        v.extend(self.output.views_mut());
        v
    }
}

impl ParamSet for Affine {
    fn arrays(&self) -> Vec<ParamView<'_>> {
        self.views("affine").to_vec()
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.views_mut().into_iter().collect()
    }
}

impl ParamSet for Mlp {
    fn arrays(&self) -> Vec<ParamView<'_>> {
        self.views("mlp")
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.views_mut()
    }
}

/// Stable softmax cross-entropy. Returns the loss and `softmax(logits) − onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(QlamError::Index(format!(
            "label {label} for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(QlamError::Numeric("non-finite logits".into()));
    }
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `base_lr · ½ · (1 + cos(π · epoch / total_epochs))`.
pub fn cosine_lr(epoch: usize, total_epochs: usize, base_lr: f64) -> f64 {
    if total_epochs == 0 {
        return base_lr;
    }
    let frac = epoch.min(total_epochs) as f64 / total_epochs as f64;
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}

pub fn global_norm(grads: &[f64]) -> f64 {
    grads.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales `grads` in place so that its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub base_lr: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, base_lr: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            base_lr,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One bias-corrected Adam update of the flat parameter vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(QlamError::Shape(format!(
                "Adam state for {} parameters given {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Vanilla tanh recurrent network:
/// `h_t = tanh(W_in x_t + b_in + W_rec h_{t−1})`, logits from `h_T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmanBaseline {
    pub hidden_dim: usize,
    pub input: Affine,
    pub recurrent: Vec<f64>,
    pub readout: Affine,
}

impl ElmanBaseline {
    pub fn zeros(hidden_dim: usize, n_classes: usize) -> Self {
        Self {
            hidden_dim,
            input: Affine::zeros(hidden_dim, 1),
            recurrent: vec![0.0; hidden_dim * hidden_dim],
            readout: Affine::zeros(n_classes, hidden_dim),
        }
    }

    pub fn init<R: Rng + ?Sized>(hidden_dim: usize, n_classes: usize, rng: &mut R) -> Self {
        let mut net = Self {
            hidden_dim,
            input: Affine::init(hidden_dim, 1, rng),
            recurrent: vec![0.0; hidden_dim * hidden_dim],
            readout: Affine::zeros(n_classes, hidden_dim),
        };
        uniform_fill(rng, &mut net.recurrent, 1.0 / (hidden_dim as f64).sqrt());
        net.readout = Affine::init(n_classes, hidden_dim, rng);
        net
    }

    /// Hidden states `h_1..h_T`, flattened `T × hidden_dim`.
    fn hidden_states(&self, tokens: &[f64]) -> Vec<f64> {
        let d = self.hidden_dim;
        let mut states = vec![0.0; tokens.len() * d];
        let mut prev = vec![0.0; d];
        for (t, &x) in tokens.iter().enumerate() {
            let h = &mut states[t * d..(t + 1) * d];
            for (i, hi) in h.iter_mut().enumerate() {
                let row = &self.recurrent[i * d..(i + 1) * d];
                let rec: f64 = row.iter().zip(&prev).map(|(w, p)| w * p).sum();
                *hi = (self.input.weights[i] * x + self.input.bias[i] + rec).tanh();
            }
            prev.copy_from_slice(h);
        }
        states
    }

    pub fn forward(&self, tokens: &[f64]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(QlamError::Input("empty token sequence".into()));
        }
        let states = self.hidden_states(tokens);
        Ok(self
            .readout
            .apply(&states[states.len() - self.hidden_dim..]))
    }

    /// Cross-entropy loss and full backpropagation-through-time gradient.
    pub fn loss_and_grad(&self, tokens: &[f64], label: usize) -> Result<(f64, ElmanBaseline)> {
        if tokens.is_empty() {
            return Err(QlamError::Input("empty token sequence".into()));
        }
        let d = self.hidden_dim;
        let states = self.hidden_states(tokens);
        let h_last = &states[states.len() - d..];
        let logits = self.readout.apply(h_last);
        let (loss, dlogits) = softmax_cross_entropy(&logits, label)?;
        if !loss.is_finite() {
            return Err(QlamError::NonFinite {
                timestep: tokens.len(),
                what: "baseline loss".into(),
            });
        }

        let mut grad = ElmanBaseline::zeros(d, self.readout.out_dim);
        let mut dh = vec![0.0; d];
        self.readout
            .backward(h_last, &dlogits, &mut grad.readout, Some(&mut dh));
        let zeros = vec![0.0; d];
        for t in (0..tokens.len()).rev() {
            let h = &states[t * d..(t + 1) * d];
            let prev = if t == 0 {
                &zeros[..]
            } else {
                &states[(t - 1) * d..t * d]
            };
            // through tanh
            let dz: Vec<f64> = dh
                .iter()
                .zip(h)
                .map(|(g, hi)| g * (1.0 - hi * hi))
                .collect();
            let mut dprev = vec![0.0; d];
            for (i, &dzi) in dz.iter().enumerate() {
                grad.input.weights[i] += dzi * tokens[t];
                grad.input.bias[i] += dzi;
                let row = &self.recurrent[i * d..(i + 1) * d];
                let grow = &mut grad.recurrent[i * d..(i + 1) * d];
                for j in 0..d {
                    grow[j] += dzi * prev[j];
                    dprev[j] += dzi * row[j];
                }
            }
            dh = dprev;
        }
        Ok((loss, grad))
    }
}

impl ParamSet for ElmanBaseline {
    fn arrays(&self) -> Vec<ParamView<'_>> {
        let mut v = self.input.views("input").to_vec();
        v.push(ParamView {
            name: "recurrent.weight".into(),
            shape: vec![self.hidden_dim, self.hidden_dim],
            data: &self.recurrent,
        });
        v.extend(self.readout.views("readout"));
        v
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.input.views_mut().into_iter().collect();
        v.push(&mut self.recurrent);
        v.extend(self.readout.views_mut());
        v
    }
}
