//! Profiling-float sampling trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// A float drifting horizontally at constant velocity while cycling
/// vertically between two depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Horizontal start position; `z` picks the starting bound (the nearer one).
    pub start: Vec3,
    /// Horizontal drift velocity `(vx, vy)` in m/s.
    pub drift_velocity: [f64; 2],
    pub vertical_speed: f64,
    /// `[shallow, deep]` in meters.
    pub depth_bounds: [f64; 2],
    pub sample_interval: f64,
    pub profiles: u32,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.depth_bounds;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("degenerate depth bounds [{lo}, {hi}]")));
        }
        if !(self.vertical_speed > 0.0 && self.vertical_speed.is_finite()) {
            return Err(Error::invalid("vertical speed must be positive"));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::invalid("sample interval must be positive"));
        }
        if self.profiles == 0 {
            return Err(Error::invalid("at least one profile is required"));
        }
        if !self.start.is_finite() || !self.drift_velocity.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("trajectory start and drift must be finite"));
        }
        Ok(())
    }

    /// Number of samples: `floor(profiles · span / speed / interval)`.
    pub fn sample_count(&self) -> usize {
        let span = self.depth_bounds[1] - self.depth_bounds[0];
        let total_time = self.profiles as f64 * span / self.vertical_speed;
        (total_time / self.sample_interval + 1e-9).floor() as usize
    }
}

/// Samples the sawtooth trajectory at `t = 0, Δt, 2Δt, ...`.
pub fn gen_zigzag_trajectory(cfg: &TrajectoryConfig) -> Result<Vec<Vec3>> {
    cfg.validate()?;
    let [lo, hi] = cfg.depth_bounds;
    let span = hi - lo;
    let profile_time = span / cfg.vertical_speed;
    let descending_first = (cfg.start.z - lo).abs() <= (cfg.start.z - hi).abs();
    let n = cfg.sample_count();
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * cfg.sample_interval;
        let profile = ((t / profile_time) + 1e-12).floor();
        let tau = (t - profile * profile_time).max(0.0);
        let down = (profile as u64 % 2 == 0) == descending_first;
        let z = if down { lo + cfg.vertical_speed * tau } else { hi - cfg.vertical_speed * tau };
        points.push(Vec3::new(
            cfg.start.x + cfg.drift_velocity[0] * t,
            cfg.start.y + cfg.drift_velocity[1] * t,
            z.clamp(lo, hi),
        ));
    }
    Ok(points)
}
