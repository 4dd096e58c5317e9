//! Turning trajectories into labelled datasets, with optional position error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Record, Split};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::oracle::field::IsmField;

/// Fractions of records assigned to each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const fn new(train: f64, validation: f64, test: f64) -> Self {
        Self { train, validation, test }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return Err(Error::invalid(format!("split fractions must be non-negative: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must sum to 1: {self:?}")));
        }
        Ok(())
    }

    /// `(train, validation, test)` counts for `n` records. Train and test are
    /// floored; validation takes the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let n_train = ((self.train * n as f64) + 1e-9).floor() as usize;
        let n_test = (((self.test * n as f64) + 1e-9).floor() as usize).min(n - n_train);
        (n_train, n - n_train - n_test, n_test)
    }
}

/// Assigns split labels by a seeded shuffle of record indices.
pub fn assign_splits(n: usize, fractions: SplitFractions, seed: u64) -> Result<Vec<Split>> {
    fractions.validate()?;
    let (n_train, n_val, _) = fractions.counts(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![Split::Test; n];
    for (rank, &idx) in order.iter().enumerate() {
        labels[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(labels)
}

/// Samples the image-source field at `positions` and labels the records.
pub fn make_dataset(
    env: &Environment,
    frequency: f64,
    source: Vec3,
    positions: &[Vec3],
    max_order: i64,
    fractions: SplitFractions,
    seed: u64,
) -> Result<Dataset> {
    if positions.is_empty() {
        return Err(Error::invalid("cannot build a dataset from an empty trajectory"));
    }
    fractions.validate()?;
    let field = IsmField::new(env, frequency, source, max_order)?;
    let labels = assign_splits(positions.len(), fractions, seed)?;
    let records = positions
        .iter()
        .zip(labels)
        .map(|(&p, split)| Ok(Record { position: p, amplitude: field.amplitude(p)?, split }))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records)
}

/// Perturbs every recorded position by independent uniform offsets in
/// `[-max_err, max_err]` per axis. Amplitudes are left untouched.
pub fn add_position_noise(dataset: &Dataset, max_err_per_dim: f64, seed: u64) -> Result<Dataset> {
    add_position_noise_with(dataset, |_| max_err_per_dim, seed)
}

/// As [`add_position_noise`] with a bound that depends on the true position.
pub fn add_position_noise_with<F: Fn(Vec3) -> f64>(dataset: &Dataset, bound: F, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = dataset.records.clone();
    for r in &mut records {
        let b = bound(r.position);
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("position error bound must be non-negative, got {b}")));
        }
        let mut offset = [0.0; 3];
        for o in &mut offset {
            // draw unconditionally so the stream does not depend on the bounds
            let u: f64 = rng.gen_range(-1.0..=1.0);
            *o = u * b;
        }
        r.position = r.position + Vec3::from_array(offset);
    }
    Ok(Dataset { records })
}
