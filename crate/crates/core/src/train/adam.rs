//! ADAM with per-parameter learning rates.

use crate::train::config::TrainConfig;

#[derive(Debug, Clone)]
pub struct Adam {
    lr: Vec<f64>,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: Vec<f64>, config: &TrainConfig) -> Self {
        let n = lr.len();
        Self { lr, beta1: config.beta1, beta2: config.beta2, epsilon: config.epsilon, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One bias-corrected update of `params` along `grad`. Parameters with a
    /// zero learning rate never move.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for j in 0..params.len() {
            if self.lr[j] == 0.0 {
                continue;
            }
            let g = grad[j];
            self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * g;
            self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[j] / c1;
            let v_hat = self.v[j] / c2;
            params[j] -= self.lr[j] * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
