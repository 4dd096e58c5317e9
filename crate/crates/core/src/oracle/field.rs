//! Ground-truth field synthesis: coherent image-source sums and plane-wave sums.

use num_complex::Complex64;

use crate::acoustics::{absorption_factor, ComplexAmp, WaveSpec};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::geometry::{direction_from_angles, Vec3};
use crate::oracle::images::{enumerate_images, ImageSource};

/// Distances below this count as a receiver sitting on an image.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

/// Precomputed image set for one source, ready to evaluate at many receivers.
#[derive(Debug, Clone)]
pub struct IsmField {
    env: Environment,
    wavenumber: f64,
    images: Vec<ImageSource>,
}

impl IsmField {
    pub fn new(env: &Environment, frequency: f64, source: Vec3, max_order: i64) -> Result<Self> {
        let wave = WaveSpec::new(frequency, env.sound_speed())?;
        let images = enumerate_images(env, source, max_order)?;
        Ok(Self { env: env.clone(), wavenumber: wave.wavenumber(), images })
    }

    pub fn images(&self) -> &[ImageSource] {
        &self.images
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// Contribution of a single image at `receiver`.
    pub fn term(&self, image: &ImageSource, receiver: Vec3) -> Result<ComplexAmp> {
        let v = receiver - image.position;
        let d = v.norm();
        if d < SINGULAR_DISTANCE {
            return Err(Error::Singularity(format!("receiver {receiver:?} coincides with an image source")));
        }
        let u = v * (1.0 / d);
        let mut coeff = Complex64::new(1.0, 0.0);
        for (face, count) in image.face_hits() {
            let model = self
                .env
                .face_model(face)
                .ok_or_else(|| Error::invalid("image reflects off a face the environment lacks"))?;
            let (c, _) = model.eval_cos(u[face.axis].abs(), None);
            coeff *= c.powu(count);
        }
        let spread = absorption_factor(d, self.env.absorption()) / d;
        Ok(coeff * Complex64::from_polar(spread, self.wavenumber * d))
    }

    /// Coherent sum over all images.
    pub fn field(&self, receiver: Vec3) -> Result<ComplexAmp> {
        receiver.ensure_finite("receiver")?;
        let mut total = Complex64::new(0.0, 0.0);
        for im in &self.images {
            total += self.term(im, receiver)?;
        }
        Ok(total)
    }

    pub fn amplitude(&self, receiver: Vec3) -> Result<f64> {
        Ok(self.field(receiver)?.norm())
    }
}

/// Image-source field of a unit point source.
pub fn field_ism(env: &Environment, frequency: f64, source: Vec3, receiver: Vec3, max_order: i64) -> Result<ComplexAmp> {
    IsmField::new(env, frequency, source, max_order)?.field(receiver)
}

/// A plane-wave arrival: amplitude, phase, azimuth, polar angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneRay {
    pub amplitude: f64,
    pub phase: f64,
    pub theta: f64,
    pub psi: f64,
}

/// `Σ A e^{iφ} e^{i k k̂·r}` over the given rays.
pub fn synth_plane_field(rays: &[PlaneRay], wavenumber: f64, receiver: Vec3) -> Result<ComplexAmp> {
    if !(wavenumber > 0.0 && wavenumber.is_finite()) {
        return Err(Error::invalid(format!("wavenumber must be positive, got {wavenumber}")));
    }
    receiver.ensure_finite("receiver")?;
    let mut total = Complex64::new(0.0, 0.0);
    for ray in rays {
        if !(ray.amplitude.is_finite() && ray.phase.is_finite()) {
            return Err(Error::invalid("plane ray amplitude and phase must be finite"));
        }
        let dir = direction_from_angles(ray.theta, ray.psi)?;
        total += Complex64::from_polar(ray.amplitude, ray.phase + wavenumber * dir.dot(receiver));
    }
    Ok(total)
}
