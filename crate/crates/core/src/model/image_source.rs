//! Spherical-wave ray basis without geometry: free image sources placed at
//! `s = r_o − d k̂(θ, ψ)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unit_direction_with_partials, Vec3};
use crate::model::{spherical, ParamGroup};
use crate::oracle::field::SINGULAR_DISTANCE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSourceModel {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub distance: Vec<f64>,
    pub wavenumber: f64,
    pub reference: Vec3,
    #[serde(default)]
    pub absorption: f64,
}

/// Sampling ranges for random initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSourceInit {
    pub amplitude: [f64; 2],
    pub theta: [f64; 2],
    pub psi: [f64; 2],
    pub distance: [f64; 2],
}

impl ImageSourceModel {
    pub fn random<R: Rng + ?Sized>(
        n_ray: usize,
        wavenumber: f64,
        reference: Vec3,
        absorption: f64,
        init: ImageSourceInit,
        rng: &mut R,
    ) -> Result<Self> {
        let mut draw = |r: [f64; 2]| if r[1] > r[0] { rng.gen_range(r[0]..r[1]) } else { r[0] };
        let mut m = Self {
            amplitude: Vec::new(),
            phase: Vec::new(),
            theta: Vec::new(),
            psi: Vec::new(),
            distance: Vec::new(),
            wavenumber,
            reference,
            absorption,
        };
        for _ in 0..n_ray {
            m.amplitude.push(draw(init.amplitude));
            m.phase.push(draw([0.0, std::f64::consts::TAU]));
            m.theta.push(draw(init.theta));
            m.psi.push(draw(init.psi));
            m.distance.push(draw(init.distance));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn n_ray(&self) -> usize {
        self.amplitude.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.amplitude.len();
        if n == 0 {
            return Err(Error::invalid("an image-source model needs at least one ray"));
        }
        if [self.phase.len(), self.theta.len(), self.psi.len(), self.distance.len()].iter().any(|&l| l != n) {
            return Err(Error::invalid("image-source parameter vectors differ in length"));
        }
        if self.distance.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid("image distances must be positive"));
        }
        if !(self.wavenumber > 0.0 && self.wavenumber.is_finite()) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {}", self.wavenumber)));
        }
        if !(self.absorption >= 0.0 && self.absorption.is_finite()) {
            return Err(Error::invalid("absorption must be non-negative"));
        }
        self.reference.ensure_finite("reference point")?;
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("image-source parameters must be finite"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        5 * self.n_ray() + 1
    }

    /// Layout: `A, φ, θ, ψ, d` (each `n_ray`), then `k`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend(&self.amplitude);
        p.extend(&self.phase);
        p.extend(&self.theta);
        p.extend(&self.psi);
        p.extend(&self.distance);
        p.push(self.wavenumber);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.n_ray();
        self.amplitude.copy_from_slice(&p[..n]);
        self.phase.copy_from_slice(&p[n..2 * n]);
        self.theta.copy_from_slice(&p[2 * n..3 * n]);
        self.psi.copy_from_slice(&p[3 * n..4 * n]);
        self.distance.copy_from_slice(&p[4 * n..5 * n]);
        self.wavenumber = p[5 * n];
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let n = self.n_ray();
        let mut g = Vec::with_capacity(self.num_params());
        g.extend(std::iter::repeat(ParamGroup::Amplitude).take(n));
        g.extend(std::iter::repeat(ParamGroup::Phase).take(n));
        g.extend(std::iter::repeat(ParamGroup::Angle).take(2 * n));
        g.extend(std::iter::repeat(ParamGroup::Distance).take(n));
        g.push(ParamGroup::Wavenumber);
        g
    }

    /// Implied image positions `r_o − d_m k̂_m`.
    pub fn image_positions(&self) -> Vec<Vec3> {
        (0..self.n_ray())
            .map(|m| {
                let (dir, _, _) = unit_direction_with_partials(self.theta[m], self.psi[m]);
                self.reference - dir * self.distance[m]
            })
            .collect()
    }

    pub(crate) fn prepare(&self) -> PreparedImageSource {
        let rays = (0..self.n_ray())
            .map(|m| {
                let (dir, d_theta, d_psi) = unit_direction_with_partials(self.theta[m], self.psi[m]);
                let dist = self.distance[m];
                ImageRayPrep {
                    source: self.reference - dir * dist,
                    rot: Complex64::from_polar(1.0, self.phase[m]),
                    amplitude: self.amplitude[m],
                    dir,
                    w_theta: d_theta * dist,
                    w_psi: d_psi * dist,
                }
            })
            .collect();
        PreparedImageSource { k: self.wavenumber, absorption: self.absorption, rays }
    }
}

struct ImageRayPrep {
    source: Vec3,
    rot: Complex64,
    amplitude: f64,
    dir: Vec3,
    w_theta: Vec3,
    w_psi: Vec3,
}

pub(crate) struct PreparedImageSource {
    k: f64,
    absorption: f64,
    rays: Vec<ImageRayPrep>,
}

fn singular(r: Vec3) -> Error {
    Error::Singularity(format!("receiver {r:?} coincides with an image source"))
}

impl PreparedImageSource {
    pub(crate) fn field(&self, r: Vec3) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for ray in &self.rays {
            let d = (r - ray.source).norm();
            if !(d >= SINGULAR_DISTANCE) {
                return Err(singular(r));
            }
            let (g, _) = spherical(self.k, self.absorption, d);
            total += ray.rot * ray.amplitude * g;
        }
        Ok(total)
    }

    pub(crate) fn field_with_grad(&self, r: Vec3, grad: &mut [Complex64]) -> Result<Complex64> {
        let n = self.rays.len();
        let i = Complex64::i();
        let mut total = Complex64::new(0.0, 0.0);
        let mut dk = Complex64::new(0.0, 0.0);
        for (m, ray) in self.rays.iter().enumerate() {
            let v = r - ray.source;
            let d = v.norm();
            if !(d >= SINGULAR_DISTANCE) {
                return Err(singular(r));
            }
            let u = v * (1.0 / d);
            let (g, gp) = spherical(self.k, self.absorption, d);
            let base = ray.rot * g;
            let t = base * ray.amplitude;
            let dt_dd = ray.rot * ray.amplitude * gp;
            total += t;
            grad[m] = base;
            grad[n + m] = i * t;
            grad[2 * n + m] = dt_dd * u.dot(ray.w_theta);
            grad[3 * n + m] = dt_dd * u.dot(ray.w_psi);
            grad[4 * n + m] = dt_dd * u.dot(ray.dir);
            dk += i * t * d;
        }
        grad[5 * n] = dk;
        Ok(total)
    }

    pub(crate) fn field_with_position_grad(&self, r: Vec3) -> Result<(Complex64, [Complex64; 3])> {
        let mut total = Complex64::new(0.0, 0.0);
        let mut dr = [Complex64::new(0.0, 0.0); 3];
        for ray in &self.rays {
            let v = r - ray.source;
            let d = v.norm();
            if !(d >= SINGULAR_DISTANCE) {
                return Err(singular(r));
            }
            let (g, gp) = spherical(self.k, self.absorption, d);
            let c = ray.rot * ray.amplitude;
            total += c * g;
            for (a, x) in dr.iter_mut().enumerate() {
                *x += c * gp * (v[a] / d);
            }
        }
        Ok((total, dr))
    }
}

/// Predicted amplitude of the free image-source sum at `r`.
pub fn predict_image_source(model: &ImageSourceModel, r: Vec3) -> Result<f64> {
    model.validate()?;
    r.ensure_finite("receiver")?;
    Ok(model.prepare().field(r)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Environment, ReflectionModel};
    use crate::geometry::angles_from_direction;
    use crate::oracle::field::IsmField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_over_distance() {
        let m = ImageSourceModel {
            amplitude: vec![1.0],
            phase: vec![0.0],
            theta: vec![0.0],
            psi: vec![0.0],
            distance: vec![4.0],
            wavenumber: 2.0,
            reference: Vec3::ZERO,
            absorption: 0.0,
        };
        // image at (0,0,-4), receiver at the origin
        assert!((predict_image_source(&m, Vec3::ZERO).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(predict_image_source(&m, Vec3::new(0.0, 0.0, -4.0)), Err(Error::Singularity(_))));
    }

    #[test]
    fn built_from_oracle_images() {
        let env = Environment::Waveguide {
            depth: 30.0,
            sound_speed: 1500.0,
            surface: ReflectionModel::PressureRelease,
            bottom: ReflectionModel::fixed(Complex64::new(0.4, -0.3)),
            absorption: 0.002,
        };
        let src = Vec3::new(0.0, 0.0, 15.0);
        let oracle = IsmField::new(&env, 5000.0, src, 6).unwrap();
        let ro = Vec3::new(100.0, 0.0, 14.0);
        let gamma_b = Complex64::new(0.4, -0.3);
        let mut m = ImageSourceModel {
            amplitude: vec![],
            phase: vec![],
            theta: vec![],
            psi: vec![],
            distance: vec![],
            wavenumber: oracle.wavenumber(),
            reference: ro,
            absorption: 0.002,
        };
        for im in oracle.images() {
            let coeff = Complex64::new(-1.0, 0.0).powu(im.n_s) * gamma_b.powu(im.n_b);
            let v = ro - im.position;
            let (theta, psi) = angles_from_direction(v * (1.0 / v.norm())).unwrap();
            m.amplitude.push(coeff.norm());
            m.phase.push(coeff.arg());
            m.theta.push(theta);
            m.psi.push(psi);
            m.distance.push(v.norm());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = Vec3::new(rng.gen_range(80.0..130.0), rng.gen_range(-1.0..1.0), rng.gen_range(1.0..29.0));
            let expected = oracle.amplitude(r).unwrap();
            let got = predict_image_source(&m, r).unwrap();
            assert!((got - expected).abs() <= 1e-10 * expected);
        }
    }

    #[test]
    fn homogeneous_in_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let init = ImageSourceInit { amplitude: [0.1, 1.0], theta: [0.0, 6.0], psi: [0.0, 3.0], distance: [50.0, 90.0] };
        let m = ImageSourceModel::random(5, 3.0, Vec3::ZERO, 0.0, init, &mut rng).unwrap();
        let mut doubled = m.clone();
        doubled.amplitude.iter_mut().for_each(|a| *a *= 2.0);
        let r = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(predict_image_source(&doubled, r).unwrap(), 2.0 * predict_image_source(&m, r).unwrap());
    }

    #[test]
    fn rejects_bad_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let init = ImageSourceInit { amplitude: [0.1, 1.0], theta: [0.0, 6.0], psi: [0.0, 3.0], distance: [0.0, 0.0] };
        assert!(ImageSourceModel::random(3, 3.0, Vec3::ZERO, 0.0, init, &mut rng).is_err());
    }
}
