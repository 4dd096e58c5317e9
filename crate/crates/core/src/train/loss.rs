//! Loss functions, penalties and their exact gradients.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::environment::ReflectionModel;
use crate::error::{Error, Result};
use crate::model::{GeometryAidedModel, ParamGroup, RayBasisModel};
use crate::train::config::{LossKind, Penalties, TrainConfig};

/// Pointwise data term and its derivative in the prediction. The absolute
/// error takes subgradient 0 at an exact fit.
#[inline]
pub(crate) fn data_term(pred: f64, y: f64, kind: LossKind) -> (f64, f64) {
    let r = pred - y;
    match kind {
        LossKind::SquaredError => (r * r, 2.0 * r),
        LossKind::AbsoluteError => {
            let s = if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            };
            (r.abs(), s)
        }
    }
}

/// `∂|p|/∂θ` from `p` and `∂p/∂θ`; zero where `p` vanishes.
#[inline]
pub(crate) fn magnitude_derivative(p: Complex64, norm: f64, dp: Complex64) -> f64 {
    if norm > 0.0 {
        (p.re * dp.re + p.im * dp.im) / norm
    } else {
        0.0
    }
}

/// Loss split into the data term and the penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub data: f64,
    pub penalty: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.data + self.penalty
    }
}

fn check_batch(batch: &[Sample]) -> Result<()> {
    if batch.is_empty() {
        Err(Error::invalid("loss needs a non-empty batch"))
    } else {
        Ok(())
    }
}

/// Mean data term over `batch`, accumulating its gradient into `grad` when given.
pub(crate) fn data_loss_with_grad(
    model: &RayBasisModel,
    batch: &[Sample],
    kind: LossKind,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    check_batch(batch)?;
    let prepared = model.prepare();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut dp = vec![Complex64::new(0.0, 0.0); if grad.is_some() { model.num_params() } else { 0 }];
    for s in batch {
        match grad.as_deref_mut() {
            None => {
                let pred = prepared.field(s.position)?.norm();
                total += data_term(pred, s.amplitude, kind).0;
            }
            Some(g) => {
                let p = prepared.field_with_grad(s.position, &mut dp)?;
                let norm = p.norm();
                let (v, dv) = data_term(norm, s.amplitude, kind);
                total += v;
                let w = dv * scale;
                if w != 0.0 {
                    for (gj, dpj) in g.iter_mut().zip(&dp) {
                        *gj += w * magnitude_derivative(p, norm, *dpj);
                    }
                }
            }
        }
    }
    Ok(total * scale)
}

/// Mean data term alone: the validation loss.
pub fn data_loss(model: &RayBasisModel, samples: &[Sample], kind: LossKind) -> Result<f64> {
    data_loss_with_grad(model, samples, kind, None)
}

/// Plane-wave (or free image-source) loss: mean data term plus `α‖A‖₁`.
pub fn loss_plane(model: &RayBasisModel, batch: &[Sample], alpha: f64, kind: LossKind) -> Result<f64> {
    let data = data_loss(model, batch, kind)?;
    Ok(data + l1_penalty(model, alpha, None))
}

fn l1_penalty(model: &RayBasisModel, alpha: f64, mut grad: Option<&mut [f64]>) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (j, (p, group)) in model.params().iter().zip(model.param_groups()).enumerate() {
        if group == ParamGroup::Amplitude {
            total += p.abs();
            if let Some(g) = grad.as_deref_mut() {
                // subgradient 0 at 0
                g[j] += alpha * if *p > 0.0 { 1.0 } else if *p < 0.0 { -1.0 } else { 0.0 };
            }
        }
    }
    alpha * total
}

/// Trapezoidal `∫₀^{π/2} ε(γ)² dγ` with `q` nodes; `grad` receives the
/// derivative in the layer's parameters.
fn energy_integral(layer: &ReflectionModel, q: usize, mut grad: Option<&mut [f64]>) -> f64 {
    let h = FRAC_PI_2 / (q - 1) as f64;
    let n = layer.num_params();
    let mut cg = vec![Complex64::new(0.0, 0.0); if grad.is_some() { n } else { 0 }];
    let mut total = 0.0;
    for j in 0..q {
        let w = if j == 0 || j == q - 1 { 0.5 * h } else { h };
        let gamma = j as f64 * h;
        let pg = if grad.is_some() { Some(cg.as_mut_slice()) } else { None };
        let (c, _) = layer.eval_cos(gamma.cos(), pg);
        let eps = c.norm();
        total += w * eps * eps;
        if let Some(g) = grad.as_deref_mut() {
            // ∂ε² = 2 Re(conj(c) ∂c)
            for (gi, ci) in g.iter_mut().zip(&cg) {
                *gi += w * 2.0 * (c.re * ci.re + c.im * ci.im);
            }
        }
    }
    total
}

/// `η · max(0, ∫ ε² dγ − 1)` by trapezoidal quadrature with `q` nodes.
pub fn energy_penalty(layer: &ReflectionModel, eta: f64, q: usize) -> Result<f64> {
    if q < 2 {
        return Err(Error::invalid("energy quadrature needs at least 2 points"));
    }
    layer.validate()?;
    Ok(eta * (energy_integral(layer, q, None) - 1.0).max(0.0))
}

/// Default angular weights: `ζ₀ / (1 + n_s + n_b)` per ray.
pub fn zeta_schedule(model: &GeometryAidedModel, zeta0: f64) -> Vec<f64> {
    model.nominal.iter().map(|r| zeta0 / (1.0 + r.order() as f64)).collect()
}

fn geometry_penalty(
    model: &GeometryAidedModel,
    zeta: &[f64],
    beta: f64,
    eta: f64,
    q: usize,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let n = model.n_ray();
    if zeta.len() != n {
        return Err(Error::invalid(format!("ζ has {} entries for {n} rays", zeta.len())));
    }
    if q < 2 {
        return Err(Error::invalid("energy quadrature needs at least 2 points"));
    }
    // ‖ζ ⊙ (e_θ² + e_ψ²)‖₂
    let v: Vec<f64> = (0..n).map(|m| zeta[m] * (model.e_theta[m].powi(2) + model.e_psi[m].powi(2))).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dist: f64 = model.e_d.iter().map(|e| e * e).sum();
    let mut total = norm + beta * dist;
    if let Some(g) = grad.as_deref_mut() {
        for m in 0..n {
            if norm > 0.0 {
                let s = v[m] / norm * zeta[m] * 2.0;
                g[m] += s * model.e_theta[m];
                g[n + m] += s * model.e_psi[m];
            }
            g[2 * n + m] += 2.0 * beta * model.e_d[m];
        }
    }
    if eta > 0.0 {
        let offset = 3 * n + 1;
        let nl = model.reflection.num_params();
        let mut lg = vec![0.0; if grad.is_some() { nl } else { 0 }];
        let integral = energy_integral(&model.reflection, q, if grad.is_some() { Some(&mut lg) } else { None });
        if integral > 1.0 {
            total += eta * (integral - 1.0);
            if let Some(g) = grad {
                for (j, x) in lg.iter().enumerate() {
                    g[offset + j] += eta * x;
                }
            }
        }
    }
    Ok(total)
}

/// Geometry-aided loss: mean data term, angular-error norm, squared distance
/// errors and the energy penalty.
pub fn loss_geometry(
    model: &GeometryAidedModel,
    batch: &[Sample],
    zeta: &[f64],
    beta: f64,
    eta: f64,
    q: usize,
    kind: LossKind,
) -> Result<f64> {
    let penalty = geometry_penalty(model, zeta, beta, eta, q, None)?;
    let wrapped = RayBasisModel::GeometryAided(model.clone());
    Ok(data_loss(&wrapped, batch, kind)? + penalty)
}

fn penalties_with_grad(model: &RayBasisModel, p: &Penalties, q: usize, grad: Option<&mut [f64]>) -> Result<f64> {
    match model {
        RayBasisModel::PlaneWave(_) | RayBasisModel::ImageSource(_) => Ok(l1_penalty(model, p.alpha, grad)),
        RayBasisModel::GeometryAided(m) => {
            let zeta = match &p.zeta {
                Some(z) => z.clone(),
                None => zeta_schedule(m, p.zeta0),
            };
            geometry_penalty(m, &zeta, p.beta, p.eta, q, grad)
        }
    }
}

/// Configured training objective on `batch`; adds its gradient into `grad`.
pub fn objective(model: &RayBasisModel, batch: &[Sample], config: &TrainConfig, mut grad: Option<&mut [f64]>) -> Result<LossParts> {
    if let Some(g) = grad.as_deref() {
        if g.len() != model.num_params() {
            return Err(Error::invalid("gradient buffer has the wrong length"));
        }
    }
    let data = data_loss_with_grad(model, batch, config.loss, grad.as_deref_mut())?;
    let penalty = penalties_with_grad(model, &config.penalties, config.quadrature_points, grad)?;
    Ok(LossParts { data, penalty })
}

/// Gradient of the configured objective with respect to every parameter.
pub fn gradients(model: &RayBasisModel, batch: &[Sample], config: &TrainConfig) -> Result<Vec<f64>> {
    let mut g = vec![0.0; model.num_params()];
    objective(model, batch, config, Some(&mut g))?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;
    use crate::geometry::Vec3;
    use crate::model::{PlaneWaveModel, RcnnWeights};
    use crate::raytrace::nominal_rays;
    use std::f64::consts::PI;

    fn two_rays(a: [f64; 2]) -> RayBasisModel {
        PlaneWaveModel { amplitude: a.to_vec(), phase: vec![0.0, 1.0], theta: vec![0.0, 1.0], psi: vec![0.5, 1.5], wavenumber: 2.0 }
            .into()
    }

    fn exact_samples(model: &RayBasisModel) -> Vec<Sample> {
        [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0), Vec3::new(-2.0, 0.5, 1.0)]
            .iter()
            .map(|&p| Sample { position: p, amplitude: model.predict(p).unwrap() })
            .collect()
    }

    #[test]
    fn plane_loss_examples() {
        let m = two_rays([1.0, -2.0]);
        let batch = exact_samples(&m);
        assert_eq!(loss_plane(&m, &batch, 0.0, LossKind::SquaredError).unwrap(), 0.0);
        assert!((loss_plane(&m, &batch, 0.1, LossKind::SquaredError).unwrap() - 0.3).abs() < 1e-15);
        let zero = two_rays([0.0, 0.0]);
        let one = [Sample { position: Vec3::ZERO, amplitude: 1.0 }];
        assert_eq!(loss_plane(&zero, &one, 0.0, LossKind::SquaredError).unwrap(), 1.0);
        assert_eq!(loss_plane(&zero, &one, 0.0, LossKind::AbsoluteError).unwrap(), 1.0);
        assert!(loss_plane(&m, &[], 0.0, LossKind::SquaredError).is_err());
    }

    #[test]
    fn l1_gradient_is_sign() {
        let m = two_rays([1.0, -2.0]);
        let batch = exact_samples(&m);
        let cfg = TrainConfig { penalties: Penalties { alpha: 0.7, ..Penalties::zero() }, ..TrainConfig::default() };
        let g = gradients(&m, &batch, &cfg).unwrap();
        assert!((g[0] - 0.7).abs() < 1e-12);
        assert!((g[1] + 0.7).abs() < 1e-12);
        let z = two_rays([0.0, 0.0]);
        let mut gz = vec![0.0; z.num_params()];
        l1_penalty(&z, 0.7, Some(&mut gz));
        assert_eq!(&gz[..2], &[0.0, 0.0]);
    }

    fn constant_layer(eps: f64) -> ReflectionModel {
        let mut w = RcnnWeights::zeros(3);
        // softplus^{-1}(ε)
        w.b_mag = eps.exp_m1().ln();
        ReflectionModel::LearnedRcnn { weights: w }
    }

    #[test]
    fn energy_penalty_examples() {
        assert_eq!(energy_penalty(&ReflectionModel::fixed(Complex64::new(0.0, 0.0)), 5.0, 64).unwrap(), 0.0);
        let one = energy_penalty(&ReflectionModel::PressureRelease, 2.0, 64).unwrap();
        assert!((one - 2.0 * (PI / 2.0 - 1.0)).abs() < 1e-12);
        assert!(energy_penalty(&constant_layer((2.0 / PI).sqrt()), 3.0, 64).unwrap() < 1e-12);
        assert!((energy_penalty(&constant_layer(1.0), 1.0, 64).unwrap() - 0.5708).abs() < 1e-4);
        assert!(energy_penalty(&ReflectionModel::PressureRelease, 1.0, 1).is_err());
    }

    fn geometry(layer: ReflectionModel) -> GeometryAidedModel {
        let env = Environment::Waveguide {
            depth: 30.0,
            sound_speed: 1500.0,
            surface: ReflectionModel::PressureRelease,
            bottom: ReflectionModel::rayleigh(1.5, 0.9, 0.0),
            absorption: 0.0,
        };
        let rays = nominal_rays(&env, Vec3::new(0.0, 0.0, 15.0), Vec3::new(50.0, 0.0, 10.0), 1).unwrap();
        GeometryAidedModel::new(rays, 1.0, layer, 0.0).unwrap()
    }

    #[test]
    fn geometry_loss_examples() {
        let layer = ReflectionModel::rayleigh(1.5, 0.9, 0.0);
        let mut m = geometry(layer.clone());
        let wrapped = RayBasisModel::GeometryAided(m.clone());
        let batch = exact_samples(&wrapped);
        let n = m.n_ray();
        assert_eq!(loss_geometry(&m, &batch, &vec![1.0; n], 1.0, 1.0, 64, LossKind::SquaredError).unwrap(), 0.0);

        m.e_theta[0] = 0.1;
        let mut zeta = vec![0.0; n];
        zeta[0] = 2.0;
        let base = data_loss(&RayBasisModel::GeometryAided(m.clone()), &batch, LossKind::SquaredError).unwrap();
        let l = loss_geometry(&m, &batch, &zeta, 0.0, 0.0, 64, LossKind::SquaredError).unwrap();
        assert!((l - base - 0.02).abs() < 1e-15);

        let mut m2 = geometry(layer);
        m2.e_d[0] = 0.5;
        m2.e_d[1] = -0.5;
        let base = data_loss(&RayBasisModel::GeometryAided(m2.clone()), &batch, LossKind::SquaredError).unwrap();
        let l = loss_geometry(&m2, &batch, &vec![0.0; n], 3.0, 0.0, 64, LossKind::SquaredError).unwrap();
        assert!((l - base - 1.5).abs() < 1e-12);

        assert!(loss_geometry(&m2, &batch, &[1.0], 3.0, 0.0, 64, LossKind::SquaredError).is_err());
    }

    #[test]
    fn zeta_schedule_decays_with_order() {
        let m = geometry(ReflectionModel::PressureRelease);
        let z = zeta_schedule(&m, 1.0);
        for (zi, r) in z.iter().zip(&m.nominal) {
            assert_eq!(*zi, 1.0 / (1.0 + r.order() as f64));
        }
    }

    #[test]
    fn zero_weights_leave_pure_data_term() {
        let mut m = geometry(constant_layer(1.3));
        m.e_theta[1] = 0.2;
        m.e_d[2] = 0.4;
        let wrapped = RayBasisModel::GeometryAided(m);
        let batch: Vec<Sample> = exact_samples(&wrapped).into_iter().map(|s| Sample { amplitude: s.amplitude * 1.1, ..s }).collect();
        let cfg = TrainConfig { penalties: Penalties::zero(), ..TrainConfig::default() };
        let parts = objective(&wrapped, &batch, &cfg, None).unwrap();
        assert_eq!(parts.penalty, 0.0);
        assert_eq!(parts.data, data_loss(&wrapped, &batch, LossKind::SquaredError).unwrap());
    }
}
