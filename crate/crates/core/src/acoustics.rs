//! Elementary acoustic quantities and unit conversions.

use std::f64::consts::{LN_10, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex pressure amplitude, arbitrary linear units.
pub type ComplexAmp = Complex64;

/// Floor applied to amplitudes before taking logarithms in metric code.
pub const DB_FLOOR: f64 = 1e-30;

/// Monochromatic wave description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub frequency: f64,
    pub sound_speed: f64,
}

impl WaveSpec {
    pub fn new(frequency: f64, sound_speed: f64) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::invalid(format!("frequency must be positive, got {frequency}")));
        }
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return Err(Error::invalid(format!("sound speed must be positive, got {sound_speed}")));
        }
        Ok(Self { frequency, sound_speed })
    }

    /// Wavenumber `2πf/c` in rad/m.
    pub fn wavenumber(&self) -> f64 {
        TAU * self.frequency / self.sound_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.frequency
    }
}

/// `20 log10(amplitude)`.
pub fn to_db(amplitude: f64) -> Result<f64> {
    if amplitude > 0.0 {
        Ok(20.0 * amplitude.log10())
    } else {
        Err(Error::Domain(format!("cannot take dB of non-positive amplitude {amplitude}")))
    }
}

/// dB value after clamping at [`DB_FLOOR`]; never fails for finite input.
pub fn to_db_clamped(amplitude: f64) -> f64 {
    20.0 * amplitude.max(DB_FLOOR).log10()
}

/// Linear amplitude factor `10^(-a d / 20)` for a path of `distance` meters
/// through a medium absorbing `absorption` dB/m.
pub fn absorption_loss(distance: f64, absorption: f64) -> Result<f64> {
    if !(distance >= 0.0) || !(absorption >= 0.0) {
        return Err(Error::invalid(format!(
            "absorption_loss needs non-negative inputs, got d={distance}, a={absorption}"
        )));
    }
    Ok(absorption_factor(distance, absorption))
}

#[inline]
pub(crate) fn absorption_factor(distance: f64, absorption: f64) -> f64 {
    if absorption == 0.0 {
        1.0
    } else {
        (-absorption * distance * LN_10 / 20.0).exp()
    }
}

/// `d/dd ln(absorption_factor)`, i.e. the log-slope of the absorption factor.
#[inline]
pub(crate) fn absorption_log_slope(absorption: f64) -> f64 {
    -absorption * LN_10 / 20.0
}
