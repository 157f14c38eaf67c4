//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    /// Decoupled weight-decay rate.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(model: &Mlp, learning_rate: f64, decay: f64) -> Self {
        Self {
            learning_rate,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let lr = self.learning_rate;
        let mut update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..theta.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                theta[i] -= lr * (mhat / (vhat.sqrt() + self.eps) + self.decay * theta[i]);
            }
        };
        for k in 0..model.weights.len() {
            update(
                &mut model.weights[k],
                &grads.weights[k],
                &mut self.m.weights[k],
                &mut self.v.weights[k],
            );
            update(
                &mut model.biases[k],
                &grads.biases[k],
                &mut self.m.biases[k],
                &mut self.v.biases[k],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy() -> (Mlp, AdamState) {
        // two-parameter model: dims [1, 1] has one weight and one bias
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let mut m = Mlp::new_seeded(&[1, 1], &mut rng);
        m.weights[0][0] = 0.5;
        m.biases[0][0] = -0.25;
        let adam = AdamState::new(&m, 0.1, 0.0);
        (m, adam)
    }

    #[test]
    fn zero_gradient_and_zero_decay_leave_parameters_unchanged() {
        let (mut m, mut adam) = toy();
        let g = Gradients::zeros_like(&m);
        adam.step(&mut m, &g);
        assert_eq!(m.weights[0][0], 0.5);
        assert_eq!(m.biases[0][0], -0.25);
    }

    #[test]
    fn first_step_moves_like_lr_times_sign() {
        let (mut m, mut adam) = toy();
        let mut g = Gradients::zeros_like(&m);
        g.weights[0][0] = 3.0;
        g.biases[0][0] = -0.004;
        adam.step(&mut m, &g);
        // first step: m_hat = g, v_hat = g^2 -> delta = -lr * g/(|g| + eps)
        let expect_w = 0.5 - 0.1 * 3.0 / (3.0 + 1e-8);
        let expect_b = -0.25 + 0.1 * 0.004 / (0.004 + 1e-8);
        assert!((m.weights[0][0] - expect_w).abs() < 1e-12);
        assert!((m.biases[0][0] - expect_b).abs() < 1e-12);
    }

    /// Straight-line scalar arithmetic reproducing two Adam steps with decay.
    #[test]
    fn two_steps_match_hand_trace() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let mut model = Mlp::new_seeded(&[1, 1], &mut rng);
        model.weights[0][0] = 1.0;
        model.biases[0][0] = 0.0;
        let mut adam = AdamState::new(&model, 0.05, 0.01);
        let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
        let (lr, decay) = (0.05, 0.01);

        // hand trace for the weight with gradients 2.0 then -1.0
        let mut theta = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (t, g) in [(1, 2.0f64), (2, -1.0f64)] {
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            let mhat = m / (1.0 - beta1_pow(beta1, t));
            let vhat = v / (1.0 - beta1_pow(beta2, t));
            theta -= lr * (mhat / (vhat.sqrt() + eps) + decay * theta);
        }

        for g in [2.0, -1.0] {
            let mut grads = Gradients::zeros_like(&model);
            grads.weights[0][0] = g;
            adam.step(&mut model, &grads);
        }
        assert!(
            (model.weights[0][0] - theta).abs() < 1e-15,
            "{} vs {}",
            model.weights[0][0],
            theta
        );
    }

    fn beta1_pow(b: f64, t: i32) -> f64 {
        b.powi(t)
    }
}
