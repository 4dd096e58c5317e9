//! Reflection-coefficient network: one input (incidence angle), one tanh
//! hidden layer, two heads (magnitude and phase).

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcnnWeights {
    pub hidden: usize,
    pub w_in: Vec<f64>,
    pub b_in: Vec<f64>,
    pub w_mag: Vec<f64>,
    pub w_phase: Vec<f64>,
    pub b_mag: f64,
    pub b_phase: f64,
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl RcnnWeights {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            w_in: vec![0.0; hidden],
            b_in: vec![0.0; hidden],
            w_mag: vec![0.0; hidden],
            w_phase: vec![0.0; hidden],
            b_mag: 0.0,
            b_phase: 0.0,
        }
    }

    /// Uniform `[-0.5, 0.5] / sqrt(fan_in)` initialization.
    pub fn random<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mut w = Self::zeros(hidden);
        let out_scale = 1.0 / (hidden as f64).sqrt();
        for j in 0..hidden {
            w.w_in[j] = rng.gen_range(-0.5..0.5);
            w.b_in[j] = rng.gen_range(-0.5..0.5);
            w.w_mag[j] = rng.gen_range(-0.5..0.5) * out_scale;
            w.w_phase[j] = rng.gen_range(-0.5..0.5) * out_scale;
        }
        w.b_mag = rng.gen_range(-0.5..0.5) * out_scale;
        w.b_phase = rng.gen_range(-0.5..0.5) * out_scale;
        w
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden;
        if h == 0 {
            return Err(Error::invalid("RCNN hidden size must be at least 1"));
        }
        if self.w_in.len() != h || self.b_in.len() != h || self.w_mag.len() != h || self.w_phase.len() != h {
            return Err(Error::invalid("RCNN weight vectors do not match the hidden size"));
        }
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("RCNN weights must be finite"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        4 * self.hidden + 2
    }

    /// Flattened as `w_in, b_in, w_mag, w_phase, b_mag, b_phase`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend_from_slice(&self.w_in);
        p.extend_from_slice(&self.b_in);
        p.extend_from_slice(&self.w_mag);
        p.extend_from_slice(&self.w_phase);
        p.push(self.b_mag);
        p.push(self.b_phase);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let h = self.hidden;
        self.w_in.copy_from_slice(&p[..h]);
        self.b_in.copy_from_slice(&p[h..2 * h]);
        self.w_mag.copy_from_slice(&p[2 * h..3 * h]);
        self.w_phase.copy_from_slice(&p[3 * h..4 * h]);
        self.b_mag = p[4 * h];
        self.b_phase = p[4 * h + 1];
    }

    pub(crate) fn forward_unchecked(&self, gamma: f64) -> (f64, f64) {
        let x = gamma / FRAC_PI_2;
        let (mut o_mag, mut o_phase) = (self.b_mag, self.b_phase);
        for j in 0..self.hidden {
            let h = (self.w_in[j] * x + self.b_in[j]).tanh();
            o_mag += self.w_mag[j] * h;
            o_phase += self.w_phase[j] * h;
        }
        (softplus(o_mag), PI * o_phase.tanh())
    }

    /// Full evaluation: `(ε, κ)`, their derivatives in `γ`, and optionally the
    /// parameter gradients of each head.
    fn forward_full(
        &self,
        gamma: f64,
        mut grads: Option<(&mut [f64], &mut [f64])>,
    ) -> (f64, f64, f64, f64) {
        let h_n = self.hidden;
        let x = gamma / FRAC_PI_2;
        let (mut o_mag, mut o_phase) = (self.b_mag, self.b_phase);
        let mut hs = [0.0f64; 64];
        let mut heap;
        let hs: &mut [f64] = if h_n <= 64 {
            &mut hs[..h_n]
        } else {
            heap = vec![0.0; h_n];
            &mut heap
        };
        for j in 0..h_n {
            let h = (self.w_in[j] * x + self.b_in[j]).tanh();
            hs[j] = h;
            o_mag += self.w_mag[j] * h;
            o_phase += self.w_phase[j] * h;
        }
        let eps = softplus(o_mag);
        let d_eps = sigmoid(o_mag);
        let t = o_phase.tanh();
        let kappa = PI * t;
        let d_kappa = PI * (1.0 - t * t);

        let mut de_dx = 0.0;
        let mut dk_dx = 0.0;
        for j in 0..h_n {
            let dh = (1.0 - hs[j] * hs[j]) * self.w_in[j];
            de_dx += self.w_mag[j] * dh;
            dk_dx += self.w_phase[j] * dh;
        }
        if let Some((ge, gk)) = grads.as_mut() {
            for j in 0..h_n {
                let sech2 = 1.0 - hs[j] * hs[j];
                let back_e = d_eps * self.w_mag[j] * sech2;
                let back_k = d_kappa * self.w_phase[j] * sech2;
                ge[j] = back_e * x;
                gk[j] = back_k * x;
                ge[h_n + j] = back_e;
                gk[h_n + j] = back_k;
                ge[2 * h_n + j] = d_eps * hs[j];
                gk[2 * h_n + j] = 0.0;
                ge[3 * h_n + j] = 0.0;
                gk[3 * h_n + j] = d_kappa * hs[j];
            }
            ge[4 * h_n] = d_eps;
            gk[4 * h_n] = 0.0;
            ge[4 * h_n + 1] = 0.0;
            gk[4 * h_n + 1] = d_kappa;
        }
        (eps, kappa, d_eps * de_dx / FRAC_PI_2, d_kappa * dk_dx / FRAC_PI_2)
    }

    /// Complex coefficient `ε e^{iκ}` as a function of `cos γ`.
    pub(crate) fn coefficient_cos(
        &self,
        cos_g: f64,
        param_grad: Option<&mut [Complex64]>,
    ) -> (Complex64, Complex64) {
        let gamma = cos_g.clamp(0.0, 1.0).acos();
        let sin_g = gamma.sin();
        // dγ/dcos = -1/sin γ; the cusp at normal incidence gets a zero subgradient
        let dgamma_dcos = if sin_g > 1e-12 { -1.0 / sin_g } else { 0.0 };
        let n = self.num_params();
        let phase = |k: f64| Complex64::from_polar(1.0, k);
        match param_grad {
            Some(out) => {
                let (mut stack_e, mut stack_k) = ([0.0f64; 258], [0.0f64; 258]);
                let (mut heap_e, mut heap_k);
                let (ge, gk): (&mut [f64], &mut [f64]) = if n <= 258 {
                    (&mut stack_e[..n], &mut stack_k[..n])
                } else {
                    heap_e = vec![0.0; n];
                    heap_k = vec![0.0; n];
                    (&mut heap_e, &mut heap_k)
                };
                let (eps, kappa, de, dk) = self.forward_full(gamma, Some((&mut *ge, &mut *gk)));
                let rot = phase(kappa);
                for i in 0..n {
                    out[i] = rot * Complex64::new(ge[i], eps * gk[i]);
                }
                let coeff = rot * eps;
                (coeff, rot * Complex64::new(de, eps * dk) * dgamma_dcos)
            }
            None => {
                let (eps, kappa, de, dk) = self.forward_full(gamma, None);
                let rot = phase(kappa);
                (rot * eps, rot * Complex64::new(de, eps * dk) * dgamma_dcos)
            }
        }
    }
}

/// Magnitude `ε ≥ 0` and phase `κ ∈ (−π, π)` predicted at incidence angle `gamma`.
pub fn rcnn_forward(weights: &RcnnWeights, gamma: f64) -> Result<(f64, f64)> {
    if !(0.0..=FRAC_PI_2).contains(&gamma) {
        return Err(Error::invalid(format!("incidence angle {gamma} outside [0, π/2]")));
    }
    Ok(weights.forward_unchecked(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights() {
        let w = RcnnWeights::zeros(DEFAULT_HIDDEN);
        for g in [0.0, 0.4, FRAC_PI_2] {
            let (eps, kappa) = rcnn_forward(&w, g).unwrap();
            assert!((eps - std::f64::consts::LN_2).abs() < 1e-15);
            assert_eq!(kappa, 0.0);
        }
        assert!((std::f64::consts::LN_2 - 0.6931).abs() < 1e-4);
    }

    #[test]
    fn out_of_range_angle() {
        let w = RcnnWeights::zeros(4);
        assert!(rcnn_forward(&w, -0.01).is_err());
        assert!(rcnn_forward(&w, 1.6).is_err());
    }

    #[test]
    fn continuous_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let w = RcnnWeights::random(DEFAULT_HIDDEN, &mut rng);
            for i in 0..100 {
                let g = FRAC_PI_2 * i as f64 / 100.0 * (1.0 - 1e-6);
                let (e0, k0) = rcnn_forward(&w, g).unwrap();
                let (e1, k1) = rcnn_forward(&w, g + 1e-6).unwrap();
                assert!(e0 >= 0.0 && k0.abs() < PI);
                assert!((e1 - e0).abs() < 1e-3 && (k1 - k0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = RcnnWeights::random(5, &mut rng);
        let mut v = RcnnWeights::zeros(5);
        v.set_params(&w.params());
        assert_eq!(w, v);
        assert_eq!(w.num_params(), 22);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = RcnnWeights::random(6, &mut rng);
        let cos_g = 0.37;
        let mut g = vec![Complex64::new(0.0, 0.0); w.num_params()];
        let (_, d_cos) = w.coefficient_cos(cos_g, Some(&mut g));
        let h = 1e-6;
        let fd = (w.coefficient_cos(cos_g + h, None).0 - w.coefficient_cos(cos_g - h, None).0) / (2.0 * h);
        assert!((fd - d_cos).norm() < 1e-7);
        let p = w.params();
        for i in 0..p.len() {
            let mut a = w.clone();
            let mut b = w.clone();
            let mut pa = p.clone();
            let mut pb = p.clone();
            pa[i] += h;
            pb[i] -= h;
            a.set_params(&pa);
            b.set_params(&pb);
            let fd = (a.coefficient_cos(cos_g, None).0 - b.coefficient_cos(cos_g, None).0) / (2.0 * h);
            assert!((fd - g[i]).norm() < 1e-7, "param {i}: {fd} vs {}", g[i]);
        }
    }
}
