//! Fully connected network with explicit forward/backward passes.
//!
//! Hidden layers use ReLU; the output layer is linear so the regulation-loss
//! gradient can push predictions in either direction without saturating.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ForecastError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    /// Row-major `[out][in]` weight matrix per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Vec<f64>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation values per layer (last entry is the output).
    post: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += scale * bi;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += scale * bi;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.weights.iter().chain(self.biases.iter()) {
            for v in w {
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

impl Mlp {
    /// Uniform Glorot initialization in +-sqrt(6 / (fan_in + fan_out)).
    pub fn new_seeded(dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Self {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn forward(&self, features: &[f64]) -> Result<(Vec<f64>, Tape), ForecastError> {
        if features.len() != self.dims[0] {
            return Err(ForecastError::DimensionMismatch(format!(
                "got {} features, model expects {}",
                features.len(),
                self.dims[0]
            )));
        }
        let mut pre = Vec::with_capacity(self.layer_count());
        let mut post = Vec::with_capacity(self.layer_count());
        let mut a = features.to_vec();
        for k in 0..self.layer_count() {
            let (n_in, n_out) = (self.dims[k], self.dims[k + 1]);
            let w = &self.weights[k];
            let mut z = self.biases[k].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for (wi, ai) in row.iter().zip(&a) {
                    acc += wi * ai;
                }
                *zo += acc;
            }
            pre.push(z.clone());
            if k + 1 < self.layer_count() {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            post.push(z.clone());
            a = z;
        }
        Ok((
            a,
            Tape {
                input: features.to_vec(),
                pre,
                post,
            },
        ))
    }

    /// Reverse-mode gradients of `<grad_output, forward(x)>` with respect to
    /// the parameters.
    pub fn backward(&self, tape: &Tape, grad_output: &[f64]) -> Result<Gradients, ForecastError> {
        let layers = self.layer_count();
        if tape.input.len() != self.dims[0]
            || tape.pre.len() != layers
            || tape
                .pre
                .iter()
                .enumerate()
                .any(|(k, z)| z.len() != self.dims[k + 1])
        {
            return Err(ForecastError::StaleTape(
                "tape does not match the model architecture".into(),
            ));
        }
        if grad_output.len() != self.output_dim() {
            return Err(ForecastError::DimensionMismatch(format!(
                "gradient length {} vs output {}",
                grad_output.len(),
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = grad_output.to_vec();
        for k in (0..layers).rev() {
            let n_in = self.dims[k];
            let n_out = self.dims[k + 1];
            let upstream: &[f64] = if k == 0 { &tape.input } else { &tape.post[k - 1] };
            let gw = &mut grads.weights[k];
            for o in 0..n_out {
                let d = delta[o];
                grads.biases[k][o] = d;
                if d != 0.0 {
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (gi, ui) in row.iter_mut().zip(upstream) {
                        *gi = d * ui;
                    }
                }
            }
            if k > 0 {
                let w = &self.weights[k];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &w[o * n_in..(o + 1) * n_in];
                        for (ni, wi) in next.iter_mut().zip(row) {
                            *ni += d * wi;
                        }
                    }
                }
                // ReLU mask from the previous layer's pre-activations
                for (ni, zi) in next.iter_mut().zip(&tape.pre[k - 1]) {
                    if *zi <= 0.0 {
                        *ni = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok(grads)
    }
}

/// Mean squared error `(1/T) sum (pred - truth)^2` and its gradient
/// `(2/T)(pred - truth)` with respect to the predictions.
pub fn mse_and_grad(pred: &[f64], truth: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), truth.len());
    let t = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(truth)
        .map(|(p, y)| {
            let e = p - y;
            loss += e * e;
            2.0 * e / t
        })
        .collect();
    (loss / t, grad)
}

/// Clamps a prediction series into `[0, capacity]`, returning the clamped
/// series and how many entries moved. Gradients pass through untouched
/// entries and vanish on clamped ones.
pub fn clamp_prediction(pred_kw: &[f64], capacity: f64) -> (Vec<f64>, usize) {
    let mut clamped = 0;
    let out = pred_kw
        .iter()
        .map(|&p| {
            let c = p.clamp(0.0, capacity);
            if c != p {
                clamped += 1;
            }
            c
        })
        .collect();
    if clamped > 0 {
        log::trace!("clamped {clamped} prediction entries into [0, {capacity}]");
    }
    (out, clamped)
}
