//! Spherical-wave ray basis anchored on nominal rays, with a shared
//! reflection layer for every lossy boundary and a sign flip per surface
//! bounce.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::environment::ReflectionModel;
use crate::error::{Error, Result};
use crate::geometry::{unit_direction_with_partials, Vec3};
use crate::model::{spherical, ParamGroup};
use crate::oracle::field::SINGULAR_DISTANCE;
use crate::raytrace::{incidence_angles, NominalRay, RayErrors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryAidedModel {
    pub nominal: Vec<NominalRay>,
    pub e_theta: Vec<f64>,
    pub e_psi: Vec<f64>,
    pub e_d: Vec<f64>,
    pub wavenumber: f64,
    pub reflection: ReflectionModel,
    #[serde(default)]
    pub absorption: f64,
}

impl GeometryAidedModel {
    /// Model with all error terms at zero.
    pub fn new(nominal: Vec<NominalRay>, wavenumber: f64, reflection: ReflectionModel, absorption: f64) -> Result<Self> {
        let n = nominal.len();
        let m = Self {
            nominal,
            e_theta: vec![0.0; n],
            e_psi: vec![0.0; n],
            e_d: vec![0.0; n],
            wavenumber,
            reflection,
            absorption,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_ray(&self) -> usize {
        self.nominal.len()
    }

    pub fn errors(&self, m: usize) -> RayErrors {
        RayErrors { theta: self.e_theta[m], psi: self.e_psi[m], distance: self.e_d[m] }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nominal.len();
        if n == 0 {
            return Err(Error::invalid("a geometry-aided model needs at least one nominal ray"));
        }
        if [self.e_theta.len(), self.e_psi.len(), self.e_d.len()].iter().any(|&l| l != n) {
            return Err(Error::invalid("error vectors must have one entry per nominal ray"));
        }
        for (m, ray) in self.nominal.iter().enumerate() {
            if !(ray.distance + self.e_d[m] > 0.0) {
                return Err(Error::invalid(format!("ray {m} has a non-positive effective distance")));
            }
        }
        if !(self.wavenumber > 0.0 && self.wavenumber.is_finite()) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {}", self.wavenumber)));
        }
        if !(self.absorption >= 0.0 && self.absorption.is_finite()) {
            return Err(Error::invalid("absorption must be non-negative"));
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("geometry-aided parameters must be finite"));
        }
        self.reflection.validate()
    }

    pub fn num_params(&self) -> usize {
        3 * self.n_ray() + 1 + self.reflection.num_params()
    }

    /// Layout: `e_θ, e_ψ, e_d` (each `n_ray`), `k`, then the reflection layer.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend(&self.e_theta);
        p.extend(&self.e_psi);
        p.extend(&self.e_d);
        p.push(self.wavenumber);
        p.extend(self.reflection.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.n_ray();
        self.e_theta.copy_from_slice(&p[..n]);
        self.e_psi.copy_from_slice(&p[n..2 * n]);
        self.e_d.copy_from_slice(&p[2 * n..3 * n]);
        self.wavenumber = p[3 * n];
        self.reflection.set_params(&p[3 * n + 1..]);
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let n = self.n_ray();
        let mut g = Vec::with_capacity(self.num_params());
        g.extend(std::iter::repeat(ParamGroup::Angle).take(2 * n));
        g.extend(std::iter::repeat(ParamGroup::Distance).take(n));
        g.push(ParamGroup::Wavenumber);
        g.extend(std::iter::repeat(ParamGroup::Reflection).take(self.reflection.num_params()));
        g
    }

    pub(crate) fn prepare(&self) -> PreparedGeometry<'_> {
        let rays = self
            .nominal
            .iter()
            .enumerate()
            .map(|(m, ray)| {
                let (dir, d_theta, d_psi) = unit_direction_with_partials(ray.theta + self.e_theta[m], ray.psi + self.e_psi[m]);
                let dist = ray.distance + self.e_d[m];
                GeoRayPrep {
                    source: ray.reference - dir * dist,
                    sign: if ray.n_s % 2 == 0 { 1.0 } else { -1.0 },
                    counts: ray.lossy_axis_counts(),
                    dir,
                    w_theta: d_theta * dist,
                    w_psi: d_psi * dist,
                }
            })
            .collect();
        PreparedGeometry { k: self.wavenumber, absorption: self.absorption, layer: &self.reflection, rays }
    }
}

struct GeoRayPrep {
    source: Vec3,
    sign: f64,
    counts: [u32; 3],
    dir: Vec3,
    w_theta: Vec3,
    w_psi: Vec3,
}

pub(crate) struct PreparedGeometry<'a> {
    k: f64,
    absorption: f64,
    layer: &'a ReflectionModel,
    rays: Vec<GeoRayPrep>,
}

fn singular(r: Vec3) -> Error {
    Error::Singularity(format!("receiver {r:?} coincides with an effective image source"))
}

/// Reflection product of one ray: the product value `C` and `∂C/∂c_a`, the
/// partial in each axis' single-bounce coefficient.
fn product(sign: f64, counts: [u32; 3], c: [Complex64; 3]) -> (Complex64, [Complex64; 3]) {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut pw = [one; 3];
    let mut dpw = [zero; 3];
    for a in 0..3 {
        if counts[a] > 0 {
            pw[a] = c[a].powu(counts[a]);
            dpw[a] = c[a].powu(counts[a] - 1) * counts[a] as f64;
        }
    }
    let total = pw[0] * pw[1] * pw[2] * sign;
    let partial = [
        dpw[0] * pw[1] * pw[2] * sign,
        pw[0] * dpw[1] * pw[2] * sign,
        pw[0] * pw[1] * dpw[2] * sign,
    ];
    (total, partial)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl PreparedGeometry<'_> {
    pub(crate) fn field(&self, r: Vec3) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for ray in &self.rays {
            let v = r - ray.source;
            let d = v.norm();
            if !(d >= SINGULAR_DISTANCE) {
                return Err(singular(r));
            }
            let mut c = [Complex64::new(1.0, 0.0); 3];
            for a in 0..3 {
                if ray.counts[a] > 0 {
                    c[a] = self.layer.eval_cos(v[a].abs() / d, None).0;
                }
            }
            let (coeff, _) = product(ray.sign, ray.counts, c);
            total += coeff * spherical(self.k, self.absorption, d).0;
        }
        Ok(total)
    }

    /// Field and `∂p/∂param` in the model's parameter layout. When `position`
    /// is given it also receives `∂p/∂r`.
    pub(crate) fn field_with_grad(
        &self,
        r: Vec3,
        grad: Option<&mut [Complex64]>,
        position: Option<&mut [Complex64; 3]>,
    ) -> Result<Complex64> {
        let n = self.rays.len();
        let q = self.layer.num_params();
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::i();
        let mut grad = grad;
        let mut position = position;
        if let Some(g) = grad.as_deref_mut() {
            g[3 * n + 1..].iter_mut().for_each(|x| *x = zero);
        }
        if let Some(p) = position.as_deref_mut() {
            *p = [zero; 3];
        }
        let mut layer_grad = vec![[zero; 3]; if grad.is_some() { q } else { 0 }];
        let mut scratch = vec![zero; q];
        let mut total = zero;
        let mut dk = zero;
        for (m, ray) in self.rays.iter().enumerate() {
            let v = r - ray.source;
            let d = v.norm();
            if !(d >= SINGULAR_DISTANCE) {
                return Err(singular(r));
            }
            let u = v * (1.0 / d);
            let mut c = [Complex64::new(1.0, 0.0); 3];
            let mut dc = [zero; 3];
            for a in 0..3 {
                if ray.counts[a] > 0 {
                    let pg = if grad.is_some() && q > 0 { Some(scratch.as_mut_slice()) } else { None };
                    let (ca, dca) = self.layer.eval_cos(u[a].abs(), pg);
                    c[a] = ca;
                    dc[a] = dca;
                    if grad.is_some() {
                        for (j, s) in scratch.iter().enumerate() {
                            layer_grad[j][a] = *s;
                        }
                    }
                }
            }
            let (coeff, partial) = product(ray.sign, ray.counts, c);
            let (g, gp) = spherical(self.k, self.absorption, d);
            let t = coeff * g;
            total += t;

            // change of the term for a displacement w of the receiver relative to the image
            let dterm = |w: Vec3| -> Complex64 {
                let uw = u.dot(w);
                let mut dcoeff = zero;
                for a in 0..3 {
                    if ray.counts[a] > 0 {
                        let du = (w[a] - u[a] * uw) / d;
                        dcoeff += partial[a] * dc[a] * (sgn(u[a]) * du);
                    }
                }
                dcoeff * g + coeff * gp * uw
            };

            if let Some(gr) = grad.as_deref_mut() {
                gr[m] = dterm(ray.w_theta);
                gr[n + m] = dterm(ray.w_psi);
                gr[2 * n + m] = dterm(ray.dir);
                dk += i * t * d;
                for j in 0..q {
                    let mut dcoeff = zero;
                    for a in 0..3 {
                        if ray.counts[a] > 0 {
                            dcoeff += partial[a] * layer_grad[j][a];
                        }
                    }
                    gr[3 * n + 1 + j] += dcoeff * g;
                }
            }
            if let Some(p) = position.as_deref_mut() {
                for (a, x) in p.iter_mut().enumerate() {
                    let mut e = [0.0; 3];
                    e[a] = 1.0;
                    *x += dterm(Vec3::from_array(e));
                }
            }
        }
        if let Some(gr) = grad {
            gr[3 * n] = dk;
        }
        Ok(total)
    }
}

/// Overall reflection magnitude and phase `(l_rc, φ_rc)` of one ray at
/// receiver `r`: the product of `ε(γ)` over lossy bounces and `n_s π` plus
/// the sum of `κ(γ)`.
pub fn reflection_product(ray: &NominalRay, errors: RayErrors, reflection: &ReflectionModel, r: Vec3) -> Result<(f64, f64)> {
    let mut magnitude = 1.0;
    let mut phase = ray.n_s as f64 * std::f64::consts::PI;
    for inc in incidence_angles(ray, errors, r)? {
        if inc.face.is_surface() {
            continue;
        }
        let (eps, kappa) = reflection.magnitude_phase(inc.gamma)?;
        magnitude *= eps;
        phase += kappa;
    }
    Ok((magnitude, phase))
}

/// Predicted amplitude of the geometry-aided model at `r`.
pub fn predict_geometry(model: &GeometryAidedModel, r: Vec3) -> Result<f64> {
    model.validate()?;
    r.ensure_finite("receiver")?;
    Ok(model.prepare().field(r)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Environment, Face, Side};
    use crate::model::rcnn::RcnnWeights;
    use crate::oracle::field::IsmField;
    use crate::raytrace::nominal_rays;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn waveguide(bottom: ReflectionModel) -> Environment {
        Environment::Waveguide { depth: 30.0, sound_speed: 1500.0, surface: ReflectionModel::PressureRelease, bottom, absorption: 0.0 }
    }

    #[test]
    fn zero_errors_reproduce_ism_in_waveguide() {
        let bottom = ReflectionModel::rayleigh(1.5, 0.9, 0.001);
        let env = waveguide(bottom.clone());
        let src = Vec3::new(0.0, 0.0, 15.0);
        let ro = Vec3::new(110.0, 0.0, 15.0);
        let oracle = IsmField::new(&env, 5000.0, src, 6).unwrap();
        let model = GeometryAidedModel::new(nominal_rays(&env, src, ro, 6).unwrap(), oracle.wavenumber(), bottom, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let r = Vec3::new(rng.gen_range(80.0..140.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..29.5));
            let want = oracle.amplitude(r).unwrap();
            let got = predict_geometry(&model, r).unwrap();
            assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn absorbing_bottom_keeps_direct_and_surface_terms() {
        let env = waveguide(ReflectionModel::fixed(Complex64::new(0.0, 0.0)));
        let src = Vec3::new(0.0, 0.0, 7.0);
        let ro = Vec3::new(20.0, 0.0, 10.0);
        let k = 2.0 * PI * 5000.0 / 1500.0;
        let model = GeometryAidedModel::new(nominal_rays(&env, src, ro, 4).unwrap(), k, ReflectionModel::fixed(Complex64::new(0.0, 0.0)), 0.0).unwrap();
        let r = Vec3::new(20.0, 3.0, 11.0);
        let d1 = r.distance(src);
        let d2 = r.distance(Vec3::new(0.0, 0.0, -7.0));
        let want = (Complex64::from_polar(1.0 / d1, k * d1) - Complex64::from_polar(1.0 / d2, k * d2)).norm();
        assert!((predict_geometry(&model, r).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn half_wavelength_distance_error_flips_phase() {
        let env = Environment::FreeField { sound_speed: 1500.0 };
        let k = 2.0 * PI * 1000.0 / 1500.0;
        let lambda = 1.5;
        let ro = Vec3::new(50.0, 0.0, 0.0);
        let mut model = GeometryAidedModel::new(nominal_rays(&env, Vec3::ZERO, ro, 0).unwrap(), k, ReflectionModel::PressureRelease, 0.0).unwrap();
        // receiver on the ray axis beyond r_o so the path grows by exactly e_d
        let r = Vec3::new(60.0, 0.0, 0.0);
        let before = model.prepare().field(r).unwrap();
        model.e_d[0] = lambda / 2.0;
        let after = model.prepare().field(r).unwrap();
        let rescaled = after * ((60.0 + lambda / 2.0) / 60.0);
        assert!((rescaled + before).norm() < 1e-12 * before.norm());
    }

    #[test]
    fn reflection_product_examples() {
        let ro = Vec3::new(0.0, 0.0, 10.0);
        let mut ray = NominalRay { theta: 0.0, psi: 0.3, distance: 30.0, n_s: 0, n_b: 0, hits: [[0; 2]; 3], reference: ro };
        let layer = ReflectionModel::rayleigh(1.5, 0.9, 0.0);
        let r = Vec3::new(2.0, 1.0, 12.0);
        assert_eq!(reflection_product(&ray, RayErrors::default(), &layer, r).unwrap(), (1.0, 0.0));

        ray.n_s = 2;
        ray.hits = [[0, 0], [0, 0], [2, 0]];
        let (l, p) = reflection_product(&ray, RayErrors::default(), &layer, r).unwrap();
        assert_eq!(l, 1.0);
        assert!((p - 2.0 * PI).abs() < 1e-15);

        // constant ε = 0.5, κ = 0.1: zero hidden weights, biases solving the heads
        let mut w = RcnnWeights::zeros(4);
        w.b_mag = (0.5f64.exp() - 1.0).ln();
        w.b_phase = (0.1 / PI).atanh();
        let rcnn = ReflectionModel::LearnedRcnn { weights: w };
        ray.n_b = 2;
        ray.hits = [[0, 0], [0, 0], [2, 2]];
        let (l, p) = reflection_product(&ray, RayErrors::default(), &rcnn, r).unwrap();
        assert!((l - 0.25).abs() < 1e-12);
        assert!((p - (0.2 + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn complex_product_matches_magnitude_phase_form() {
        let wall = ReflectionModel::rayleigh(1.5, 0.9, 0.01);
        let env = Environment::Box {
            dims: [2.5, 1.2, 0.8],
            sound_speed: 1505.0,
            walls: [wall.clone(), wall.clone(), wall.clone(), wall.clone(), ReflectionModel::PressureRelease, wall.clone()],
            absorption: 0.0,
        };
        let ro = Vec3::new(1.1, 0.6, 0.4);
        let rays = nominal_rays(&env, Vec3::new(0.5, 0.6, 0.3), ro, 3).unwrap();
        let mut model = GeometryAidedModel::new(rays, 2.0 * PI * 10000.0 / 1505.0, wall.clone(), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 0..model.n_ray() {
            model.e_theta[m] = rng.gen_range(-0.01..0.01);
            model.e_psi[m] = rng.gen_range(-0.01..0.01);
            model.e_d[m] = rng.gen_range(-0.01..0.01);
        }
        let r = Vec3::new(1.3, 0.3, 0.6);
        let mut total = Complex64::new(0.0, 0.0);
        for (m, ray) in model.nominal.iter().enumerate() {
            let (l, phi) = reflection_product(ray, model.errors(m), &wall, r).unwrap();
            let d = r.distance(ray.effective_image(model.errors(m)));
            total += Complex64::from_polar(l / d, phi + model.wavenumber * d);
        }
        let p = model.prepare().field(r).unwrap();
        assert!((p - total).norm() < 1e-12 * total.norm());
        assert!(Face::SURFACE == Face { axis: 2, side: Side::Low });
    }
}
