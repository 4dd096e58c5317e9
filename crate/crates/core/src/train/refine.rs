//! Second training stage: with the model frozen, estimate per-record
//! position errors.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::model::RayBasisModel;
use crate::train::adam::Adam;
use crate::train::config::TrainConfig;
use crate::train::loss::{data_term, magnitude_derivative};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    /// Estimated error per record: true position ≈ recorded + offset.
    pub offsets: Vec<Vec3>,
    /// Objective per epoch.
    pub loss_history: Vec<f64>,
    pub best_loss: f64,
    pub epochs_run: usize,
}

impl RefineReport {
    /// `dataset` with the estimated offsets applied.
    pub fn corrected(&self, dataset: &Dataset) -> Dataset {
        let mut out = dataset.clone();
        for (r, o) in out.records.iter_mut().zip(&self.offsets) {
            r.position = r.position + *o;
        }
        out
    }

    /// Writes `x,y,z,dx,dy,dz` per record: recorded position, then offset.
    pub fn write_csv<W: std::io::Write>(&self, dataset: &Dataset, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "z", "dx", "dy", "dz"])?;
        for (r, o) in dataset.records.iter().zip(&self.offsets) {
            let p = r.position;
            w.write_record([p.x, p.y, p.z, o.x, o.y, o.z].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Objective `mean_i [data(|p(x_i + o_i)|, y_i) + w‖o_i‖²]` and its gradient
/// in the stacked offsets.
fn refine_objective(model: &RayBasisModel, dataset: &Dataset, offsets: &[f64], weight: f64, cfg: &TrainConfig, grad: &mut [f64]) -> Result<f64> {
    let prepared = model.prepare();
    let scale = 1.0 / dataset.len() as f64;
    let mut total = 0.0;
    for (i, rec) in dataset.records.iter().enumerate() {
        let o = Vec3::new(offsets[3 * i], offsets[3 * i + 1], offsets[3 * i + 2]);
        let (p, dr) = prepared.field_with_position_grad(rec.position + o)?;
        let norm = p.norm();
        let (v, dv) = data_term(norm, rec.amplitude, cfg.loss);
        total += v + weight * o.dot(o);
        for a in 0..3 {
            grad[3 * i + a] = scale * (dv * magnitude_derivative(p, norm, dr[a]) + 2.0 * weight * o[a]);
        }
    }
    Ok(total * scale)
}

/// Estimates per-record position offsets for every record of `dataset`
/// against the frozen `model`, penalized by `weight · Σ‖offset‖²`. Uses
/// full-batch ADAM with the position learning rate and the configured epoch
/// budget and patience.
pub fn refine_positions(model: &RayBasisModel, dataset: &Dataset, weight: f64, config: &TrainConfig) -> Result<RefineReport> {
    config.validate()?;
    model.validate()?;
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::invalid(format!("position penalty weight must be non-negative, got {weight}")));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("cannot refine positions of an empty dataset"));
    }
    let n = 3 * dataset.len();
    let mut offsets = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut opt = Adam::new(vec![config.position_learning_rate(); n], config);
    let mut best = refine_objective(model, dataset, &offsets, weight, config, &mut grad)?;
    let mut best_offsets = offsets.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    for epoch in 1..=config.max_epochs {
        opt.step(&mut offsets, &grad);
        let loss = refine_objective(model, dataset, &offsets, weight, config, &mut grad)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, reason: format!("refinement loss is {loss}") });
        }
        history.push(loss);
        if config.verbose {
            eprintln!("refine epoch {epoch}: loss {loss:.6e}");
        }
        if loss < best {
            best = loss;
            best_offsets.copy_from_slice(&offsets);
            best_epoch = epoch;
        } else if config.patience > 0 && epoch - best_epoch >= config.patience {
            break;
        }
    }
    Ok(RefineReport {
        offsets: best_offsets.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
        epochs_run: history.len(),
        loss_history: history,
        best_loss: best,
    })
}
