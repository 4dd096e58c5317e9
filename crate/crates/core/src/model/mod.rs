//! Trainable ray-basis models and the reflection layers they use.

pub mod geometry_aided;
pub mod image_source;
pub mod plane;
pub mod rayleigh;
pub mod rcnn;

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustics::{absorption_factor, absorption_log_slope};
use crate::error::Result;
use crate::geometry::Vec3;

pub use geometry_aided::{predict_geometry, reflection_product, GeometryAidedModel};
pub use image_source::{predict_image_source, ImageSourceInit, ImageSourceModel};
pub use plane::{predict_plane, PlaneInit, PlaneWaveModel};
pub use rayleigh::{rayleigh_coeff, RayleighParams};
pub use rcnn::{rcnn_forward, RcnnWeights, DEFAULT_HIDDEN};

/// Optimizer grouping of parameters, used to assign learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Amplitude,
    Phase,
    Angle,
    Distance,
    Wavenumber,
    Reflection,
}

/// Spherical spreading with absorption, `a(d) e^{ikd} / d`, and its
/// derivative in `d`.
#[inline]
pub(crate) fn spherical(k: f64, absorption: f64, d: f64) -> (Complex64, Complex64) {
    let g = Complex64::from_polar(absorption_factor(d, absorption) / d, k * d);
    let gp = g * Complex64::new(absorption_log_slope(absorption) - 1.0 / d, k);
    (g, gp)
}

/// Any of the three model kinds, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RayBasisModel {
    PlaneWave(PlaneWaveModel),
    ImageSource(ImageSourceModel),
    GeometryAided(GeometryAidedModel),
}

impl From<PlaneWaveModel> for RayBasisModel {
    fn from(m: PlaneWaveModel) -> Self {
        RayBasisModel::PlaneWave(m)
    }
}

impl From<ImageSourceModel> for RayBasisModel {
    fn from(m: ImageSourceModel) -> Self {
        RayBasisModel::ImageSource(m)
    }
}

impl From<GeometryAidedModel> for RayBasisModel {
    fn from(m: GeometryAidedModel) -> Self {
        RayBasisModel::GeometryAided(m)
    }
}

impl RayBasisModel {
    pub fn kind(&self) -> &'static str {
        match self {
            RayBasisModel::PlaneWave(_) => "plane_wave",
            RayBasisModel::ImageSource(_) => "image_source",
            RayBasisModel::GeometryAided(_) => "geometry_aided",
        }
    }

    pub fn n_ray(&self) -> usize {
        match self {
            RayBasisModel::PlaneWave(m) => m.n_ray(),
            RayBasisModel::ImageSource(m) => m.n_ray(),
            RayBasisModel::GeometryAided(m) => m.n_ray(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RayBasisModel::PlaneWave(m) => m.validate(),
            RayBasisModel::ImageSource(m) => m.validate(),
            RayBasisModel::GeometryAided(m) => m.validate(),
        }
    }

    /// Every trainable scalar, including `k` and reflection-layer weights.
    pub fn num_params(&self) -> usize {
        match self {
            RayBasisModel::PlaneWave(m) => m.num_params(),
            RayBasisModel::ImageSource(m) => m.num_params(),
            RayBasisModel::GeometryAided(m) => m.num_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            RayBasisModel::PlaneWave(m) => m.params(),
            RayBasisModel::ImageSource(m) => m.params(),
            RayBasisModel::GeometryAided(m) => m.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.num_params(), "parameter vector length");
        match self {
            RayBasisModel::PlaneWave(m) => m.set_params(p),
            RayBasisModel::ImageSource(m) => m.set_params(p),
            RayBasisModel::GeometryAided(m) => m.set_params(p),
        }
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        match self {
            RayBasisModel::PlaneWave(m) => m.param_groups(),
            RayBasisModel::ImageSource(m) => m.param_groups(),
            RayBasisModel::GeometryAided(m) => m.param_groups(),
        }
    }

    /// Pulls parameters with hard domain limits back inside them.
    pub(crate) fn project(&mut self) {
        match self {
            RayBasisModel::PlaneWave(m) => m.wavenumber = m.wavenumber.max(1e-9),
            RayBasisModel::ImageSource(m) => {
                m.wavenumber = m.wavenumber.max(1e-9);
                m.distance.iter_mut().for_each(|d| *d = d.max(1e-6));
            }
            RayBasisModel::GeometryAided(m) => {
                m.wavenumber = m.wavenumber.max(1e-9);
                for (e, ray) in m.e_d.iter_mut().zip(&m.nominal) {
                    *e = e.max(1e-6 - ray.distance);
                }
                m.reflection.project();
            }
        }
    }

    pub(crate) fn prepare(&self) -> Prepared<'_> {
        match self {
            RayBasisModel::PlaneWave(m) => Prepared::Plane(m.prepare()),
            RayBasisModel::ImageSource(m) => Prepared::Image(m.prepare()),
            RayBasisModel::GeometryAided(m) => Prepared::Geometry(m.prepare()),
        }
    }

    /// Complex field at `r`.
    pub fn field(&self, r: Vec3) -> Result<Complex64> {
        self.validate()?;
        r.ensure_finite("receiver")?;
        self.prepare().field(r)
    }

    /// Predicted amplitude at `r`.
    pub fn predict(&self, r: Vec3) -> Result<f64> {
        Ok(self.field(r)?.norm())
    }

    /// Amplitudes at many points, evaluated in parallel; each point fails
    /// independently.
    pub fn predict_many(&self, points: &[Vec3]) -> Result<Vec<Result<f64>>> {
        self.validate()?;
        let prepared = self.prepare();
        Ok(points
            .par_iter()
            .map(|&r| {
                r.ensure_finite("receiver")?;
                Ok(prepared.field(r)?.norm())
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A model with per-ray quantities precomputed for repeated evaluation.
pub(crate) enum Prepared<'a> {
    Plane(plane::PreparedPlane),
    Image(image_source::PreparedImageSource),
    Geometry(geometry_aided::PreparedGeometry<'a>),
}

impl Prepared<'_> {
    pub(crate) fn field(&self, r: Vec3) -> Result<Complex64> {
        match self {
            Prepared::Plane(p) => Ok(p.field(r)),
            Prepared::Image(p) => p.field(r),
            Prepared::Geometry(p) => p.field(r),
        }
    }

    /// Field and `∂p/∂param` for every parameter.
    pub(crate) fn field_with_grad(&self, r: Vec3, grad: &mut [Complex64]) -> Result<Complex64> {
        match self {
            Prepared::Plane(p) => Ok(p.field_with_grad(r, grad)),
            Prepared::Image(p) => p.field_with_grad(r, grad),
            Prepared::Geometry(p) => p.field_with_grad(r, Some(grad), None),
        }
    }

    /// Field and `∂p/∂r`.
    pub(crate) fn field_with_position_grad(&self, r: Vec3) -> Result<(Complex64, [Complex64; 3])> {
        match self {
            Prepared::Plane(p) => Ok(p.field_with_position_grad(r)),
            Prepared::Image(p) => p.field_with_position_grad(r),
            Prepared::Geometry(p) => {
                let mut dr = [Complex64::new(0.0, 0.0); 3];
                let f = p.field_with_grad(r, None, Some(&mut dr))?;
                Ok((f, dr))
            }
        }
    }
}
