//! Inverse-distance-weighted interpolation of training amplitudes.

use rayon::prelude::*;

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Weighted mean of `train` amplitudes with weights `1 / d^power`. A query
/// that coincides with a training position returns that amplitude.
pub fn idw_baseline(train: &[Sample], queries: &[Vec3], power: f64) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::invalid("inverse-distance interpolation needs training data"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::invalid(format!("power must be positive, got {power}")));
    }
    Ok(queries
        .par_iter()
        .map(|&q| {
            let (mut num, mut den) = (0.0, 0.0);
            for s in train {
                let d = s.position.distance(q);
                if d == 0.0 {
                    return s.amplitude;
                }
                let w = d.powf(-power);
                num += w * s.amplitude;
                den += w;
            }
            num / den
        })
        .collect())
}
