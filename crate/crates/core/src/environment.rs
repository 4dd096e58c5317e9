//! Propagation environments and boundary reflection models.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::model::rayleigh::{rayleigh_eval, RayleighParams};
use crate::model::rcnn::RcnnWeights;

/// Boundary reflection behaviour as a function of incidence angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReflectionModel {
    /// Coefficient −1 at every angle.
    PressureRelease,
    FixedCoeff { re: f64, im: f64 },
    Rayleigh { rho_r: f64, c_r: f64, delta: f64 },
    LearnedRcnn { weights: RcnnWeights },
}

impl ReflectionModel {
    pub fn rayleigh(rho_r: f64, c_r: f64, delta: f64) -> Self {
        ReflectionModel::Rayleigh { rho_r, c_r, delta }
    }

    pub fn fixed(coeff: Complex64) -> Self {
        ReflectionModel::FixedCoeff { re: coeff.re, im: coeff.im }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReflectionModel::PressureRelease => Ok(()),
            ReflectionModel::FixedCoeff { re, im } => {
                if re.is_finite() && im.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("fixed reflection coefficient must be finite"))
                }
            }
            ReflectionModel::Rayleigh { rho_r, c_r, delta } => {
                RayleighParams::new(*rho_r, *c_r, *delta).map(|_| ())
            }
            ReflectionModel::LearnedRcnn { weights } => weights.validate(),
        }
    }

    /// Number of trainable scalars carried by this model.
    pub fn num_params(&self) -> usize {
        match self {
            ReflectionModel::PressureRelease | ReflectionModel::FixedCoeff { .. } => 0,
            ReflectionModel::Rayleigh { .. } => 3,
            ReflectionModel::LearnedRcnn { weights } => weights.num_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            ReflectionModel::PressureRelease | ReflectionModel::FixedCoeff { .. } => Vec::new(),
            ReflectionModel::Rayleigh { rho_r, c_r, delta } => vec![*rho_r, *c_r, *delta],
            ReflectionModel::LearnedRcnn { weights } => weights.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match self {
            ReflectionModel::PressureRelease | ReflectionModel::FixedCoeff { .. } => {}
            ReflectionModel::Rayleigh { rho_r, c_r, delta } => {
                *rho_r = p[0];
                *c_r = p[1];
                *delta = p[2];
            }
            ReflectionModel::LearnedRcnn { weights } => weights.set_params(p),
        }
    }

    /// Keeps physically constrained parameters inside their domain after an
    /// optimizer step.
    pub(crate) fn project(&mut self) {
        if let ReflectionModel::Rayleigh { rho_r, c_r, delta } = self {
            *rho_r = rho_r.max(1e-6);
            *c_r = c_r.max(1e-6);
            *delta = delta.max(0.0);
        }
    }

    /// Complex coefficient at incidence angle `gamma` (rad from the normal).
    pub fn coefficient(&self, gamma: f64) -> Result<Complex64> {
        check_incidence(gamma)?;
        Ok(self.eval_cos(gamma.cos(), None).0)
    }

    /// Magnitude and phase `(ε, κ)` at incidence angle `gamma`. For the RCNN
    /// these are the raw network heads; otherwise modulus and argument.
    pub fn magnitude_phase(&self, gamma: f64) -> Result<(f64, f64)> {
        check_incidence(gamma)?;
        Ok(match self {
            ReflectionModel::LearnedRcnn { weights } => weights.forward_unchecked(gamma),
            _ => {
                let c = self.eval_cos(gamma.cos(), None).0;
                (c.norm(), c.arg())
            }
        })
    }

    /// Coefficient and its derivative with respect to `cos γ`. When
    /// `param_grad` is given it receives `∂coeff/∂param` for every trainable
    /// parameter (length [`Self::num_params`]).
    pub(crate) fn eval_cos(
        &self,
        cos_g: f64,
        param_grad: Option<&mut [Complex64]>,
    ) -> (Complex64, Complex64) {
        let cos_g = cos_g.clamp(0.0, 1.0);
        match self {
            ReflectionModel::PressureRelease => (Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)),
            ReflectionModel::FixedCoeff { re, im } => (Complex64::new(*re, *im), Complex64::new(0.0, 0.0)),
            ReflectionModel::Rayleigh { rho_r, c_r, delta } => {
                rayleigh_eval(cos_g, *rho_r, *c_r, *delta, param_grad)
            }
            ReflectionModel::LearnedRcnn { weights } => weights.coefficient_cos(cos_g, param_grad),
        }
    }
}

fn check_incidence(gamma: f64) -> Result<()> {
    if (-1e-12..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::invalid(format!("incidence angle {gamma} outside [0, π/2]")))
    }
}

/// Which side of an axis a boundary sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Low = 0,
    High = 1,
}

/// A boundary face: axis (0 = x, 1 = y, 2 = z) and side. The low z face is
/// the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub const SURFACE: Face = Face { axis: 2, side: Side::Low };

    pub fn is_surface(self) -> bool {
        self == Face::SURFACE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Environment {
    FreeField {
        sound_speed: f64,
    },
    /// Flat water column between the surface (`z = 0`) and the bottom
    /// (`z = depth`), laterally unbounded.
    Waveguide {
        depth: f64,
        sound_speed: f64,
        surface: ReflectionModel,
        bottom: ReflectionModel,
        #[serde(default)]
        absorption: f64,
    },
    /// Rectangular tank `[0, Lx] × [0, Ly] × [0, Lz]`. Walls are ordered
    /// x-min, x-max, y-min, y-max, z-min (water line), z-max (floor).
    Box {
        dims: [f64; 3],
        sound_speed: f64,
        walls: [ReflectionModel; 6],
        #[serde(default)]
        absorption: f64,
    },
}

impl Environment {
    pub fn sound_speed(&self) -> f64 {
        match self {
            Environment::FreeField { sound_speed }
            | Environment::Waveguide { sound_speed, .. }
            | Environment::Box { sound_speed, .. } => *sound_speed,
        }
    }

    /// Volume absorption in dB/m.
    pub fn absorption(&self) -> f64 {
        match self {
            Environment::FreeField { .. } => 0.0,
            Environment::Waveguide { absorption, .. } | Environment::Box { absorption, .. } => *absorption,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.sound_speed();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("sound speed must be positive, got {c}")));
        }
        let a = self.absorption();
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("absorption must be non-negative, got {a}")));
        }
        match self {
            Environment::FreeField { .. } => Ok(()),
            Environment::Waveguide { depth, surface, bottom, .. } => {
                if !(*depth > 0.0 && depth.is_finite()) {
                    return Err(Error::invalid(format!("waveguide depth must be positive, got {depth}")));
                }
                surface.validate()?;
                bottom.validate()
            }
            Environment::Box { dims, walls, .. } => {
                if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                    return Err(Error::invalid(format!("box dimensions must be positive, got {dims:?}")));
                }
                walls.iter().try_for_each(|w| w.validate())
            }
        }
    }

    /// Reflection model of a face, if that face exists in this environment.
    pub fn face_model(&self, face: Face) -> Option<&ReflectionModel> {
        match self {
            Environment::FreeField { .. } => None,
            Environment::Waveguide { surface, bottom, .. } => match (face.axis, face.side) {
                (2, Side::Low) => Some(surface),
                (2, Side::High) => Some(bottom),
                _ => None,
            },
            Environment::Box { walls, .. } => Some(&walls[2 * face.axis + face.side as usize]),
        }
    }

    /// True when `p` lies strictly inside the propagation domain.
    pub fn contains_strictly(&self, p: Vec3) -> bool {
        if !p.is_finite() {
            return false;
        }
        match self {
            Environment::FreeField { .. } => true,
            Environment::Waveguide { depth, .. } => p.z > 0.0 && p.z < *depth,
            Environment::Box { dims, .. } => (0..3).all(|a| p[a] > 0.0 && p[a] < dims[a]),
        }
    }
}
