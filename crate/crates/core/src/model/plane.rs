//! Plane-wave ray basis: `p(r) = Σ A e^{iφ} e^{ik k̂·r}`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unit_direction_with_partials, Vec3};
use crate::model::ParamGroup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveModel {
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
    pub wavenumber: f64,
}

/// Sampling ranges for random initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneInit {
    pub amplitude: [f64; 2],
    pub theta: [f64; 2],
    pub psi: [f64; 2],
}

impl Default for PlaneInit {
    fn default() -> Self {
        Self {
            amplitude: [0.0, 1.0],
            theta: [0.0, std::f64::consts::TAU],
            psi: [0.0, std::f64::consts::PI],
        }
    }
}

impl PlaneWaveModel {
    pub fn random<R: Rng + ?Sized>(n_ray: usize, wavenumber: f64, init: PlaneInit, rng: &mut R) -> Result<Self> {
        if n_ray == 0 {
            return Err(Error::invalid("a plane-wave model needs at least one ray"));
        }
        let mut draw = |r: [f64; 2]| if r[1] > r[0] { rng.gen_range(r[0]..r[1]) } else { r[0] };
        let mut m = Self {
            amplitude: Vec::with_capacity(n_ray),
            phase: Vec::with_capacity(n_ray),
            theta: Vec::with_capacity(n_ray),
            psi: Vec::with_capacity(n_ray),
            wavenumber,
        };
        for _ in 0..n_ray {
            m.amplitude.push(draw(init.amplitude));
            m.phase.push(draw([0.0, std::f64::consts::TAU]));
            m.theta.push(draw(init.theta));
            m.psi.push(draw(init.psi));
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
            return Err(Error::invalid("a plane-wave model needs at least one ray"));
        }
        if [self.phase.len(), self.theta.len(), self.psi.len()].iter().any(|&l| l != n) {
            return Err(Error::invalid("plane-wave parameter vectors differ in length"));
        }
        if !(self.wavenumber > 0.0 && self.wavenumber.is_finite()) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {}", self.wavenumber)));
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("plane-wave parameters must be finite"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        4 * self.n_ray() + 1
    }

    /// Layout: `A, φ, θ, ψ` (each `n_ray`), then `k`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        p.extend(&self.amplitude);
        p.extend(&self.phase);
        p.extend(&self.theta);
        p.extend(&self.psi);
        p.push(self.wavenumber);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.n_ray();
        self.amplitude.copy_from_slice(&p[..n]);
        self.phase.copy_from_slice(&p[n..2 * n]);
        self.theta.copy_from_slice(&p[2 * n..3 * n]);
        self.psi.copy_from_slice(&p[3 * n..4 * n]);
        self.wavenumber = p[4 * n];
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let n = self.n_ray();
        let mut g = Vec::with_capacity(self.num_params());
        g.extend(std::iter::repeat(ParamGroup::Amplitude).take(n));
        g.extend(std::iter::repeat(ParamGroup::Phase).take(n));
        g.extend(std::iter::repeat(ParamGroup::Angle).take(2 * n));
        g.push(ParamGroup::Wavenumber);
        g
    }

    pub(crate) fn prepare(&self) -> PreparedPlane {
        let rays = (0..self.n_ray())
            .map(|m| {
                let (dir, d_theta, d_psi) = unit_direction_with_partials(self.theta[m], self.psi[m]);
                PlaneRayPrep { amplitude: self.amplitude[m], phase: self.phase[m], dir, d_theta, d_psi }
            })
            .collect();
        PreparedPlane { k: self.wavenumber, rays }
    }
}

struct PlaneRayPrep {
    amplitude: f64,
    phase: f64,
    dir: Vec3,
    d_theta: Vec3,
    d_psi: Vec3,
}

pub(crate) struct PreparedPlane {
    k: f64,
    rays: Vec<PlaneRayPrep>,
}

impl PreparedPlane {
    pub(crate) fn field(&self, r: Vec3) -> Complex64 {
        self.rays
            .iter()
            .map(|ray| Complex64::from_polar(ray.amplitude, ray.phase + self.k * ray.dir.dot(r)))
            .sum()
    }

    pub(crate) fn field_with_grad(&self, r: Vec3, grad: &mut [Complex64]) -> Complex64 {
        let n = self.rays.len();
        let i = Complex64::i();
        let mut total = Complex64::new(0.0, 0.0);
        let mut dk = Complex64::new(0.0, 0.0);
        for (m, ray) in self.rays.iter().enumerate() {
            let proj = ray.dir.dot(r);
            let e = Complex64::from_polar(1.0, ray.phase + self.k * proj);
            let t = e * ray.amplitude;
            let it = i * t;
            total += t;
            grad[m] = e;
            grad[n + m] = it;
            grad[2 * n + m] = it * (self.k * ray.d_theta.dot(r));
            grad[3 * n + m] = it * (self.k * ray.d_psi.dot(r));
            dk += it * proj;
        }
        grad[4 * n] = dk;
        total
    }

    pub(crate) fn field_with_position_grad(&self, r: Vec3) -> (Complex64, [Complex64; 3]) {
        let i = Complex64::i();
        let mut total = Complex64::new(0.0, 0.0);
        let mut dr = [Complex64::new(0.0, 0.0); 3];
        for ray in &self.rays {
            let t = Complex64::from_polar(ray.amplitude, ray.phase + self.k * ray.dir.dot(r));
            total += t;
            let ikt = i * t * self.k;
            for (a, d) in dr.iter_mut().enumerate() {
                *d += ikt * ray.dir[a];
            }
        }
        (total, dr)
    }
}

/// Predicted amplitude `|Σ A e^{iφ} e^{ik k̂·r}|`.
pub fn predict_plane(model: &PlaneWaveModel, r: Vec3) -> Result<f64> {
    model.validate()?;
    r.ensure_finite("receiver")?;
    Ok(model.prepare().field(r).norm())
}
