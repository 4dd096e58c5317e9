//! Training hyper-parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    #[serde(alias = "squared-error")]
    SquaredError,
    #[serde(alias = "absolute-error")]
    AbsoluteError,
}

/// Penalty weights. All default to zero except `zeta0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Penalties {
    /// L1 weight on ray amplitudes.
    pub alpha: f64,
    /// Base angular weight; ray `m` gets `zeta0 / (1 + n_s + n_b)`.
    pub zeta0: f64,
    /// Explicit per-ray angular weights, overriding `zeta0`.
    pub zeta: Option<Vec<f64>>,
    /// Weight on squared distance errors.
    pub beta: f64,
    /// Energy-conservation weight for the reflection layer.
    pub eta: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self { alpha: 0.0, zeta0: 1.0, zeta: None, beta: 0.0, eta: 0.0 }
    }
}

impl Penalties {
    pub fn zero() -> Self {
        Self { alpha: 0.0, zeta0: 0.0, zeta: None, beta: 0.0, eta: 0.0 }
    }
}

/// Per-group learning-rate overrides; unset groups use the base rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupRates {
    pub amplitude: Option<f64>,
    pub phase: Option<f64>,
    pub angle: Option<f64>,
    pub distance: Option<f64>,
    /// Zero by default: frequency and sound speed are usually known.
    pub wavenumber: Option<f64>,
    pub reflection: Option<f64>,
    /// Used only by position refinement.
    pub position: Option<f64>,
}

impl Default for GroupRates {
    fn default() -> Self {
        Self {
            amplitude: None,
            phase: None,
            angle: None,
            distance: None,
            wavenumber: Some(0.0),
            reflection: None,
            position: Some(1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub group_learning_rates: GroupRates,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    pub restarts: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub penalties: Penalties,
    pub quadrature_points: usize,
    /// Print one summary line per epoch.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            group_learning_rates: GroupRates::default(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 5000,
            patience: 500,
            restarts: 1,
            seed: 0,
            loss: LossKind::SquaredError,
            penalties: Penalties::default(),
            quadrature_points: 64,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.learning_rate) {
            return Err(Error::invalid("learning rate must be non-negative"));
        }
        let g = &self.group_learning_rates;
        for r in [g.amplitude, g.phase, g.angle, g.distance, g.wavenumber, g.reflection, g.position].into_iter().flatten() {
            if !nonneg(r) {
                return Err(Error::invalid("group learning rates must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("ADAM betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("ADAM epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("at least one restart is required"));
        }
        if self.quadrature_points < 2 {
            return Err(Error::invalid("energy quadrature needs at least 2 points"));
        }
        let p = &self.penalties;
        if ![p.alpha, p.zeta0, p.beta, p.eta].into_iter().all(nonneg) {
            return Err(Error::invalid("penalty weights must be non-negative"));
        }
        if let Some(z) = &p.zeta {
            if !z.iter().copied().all(nonneg) {
                return Err(Error::invalid("penalty weights must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn learning_rate_for(&self, group: ParamGroup) -> f64 {
        let g = &self.group_learning_rates;
        let over = match group {
            ParamGroup::Amplitude => g.amplitude,
            ParamGroup::Phase => g.phase,
            ParamGroup::Angle => g.angle,
            ParamGroup::Distance => g.distance,
            ParamGroup::Wavenumber => g.wavenumber,
            ParamGroup::Reflection => g.reflection,
        };
        over.unwrap_or(self.learning_rate)
    }

    pub fn position_learning_rate(&self) -> f64 {
        self.group_learning_rates.position.unwrap_or(self.learning_rate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}
