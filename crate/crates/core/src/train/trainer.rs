//! Mini-batch training with early stopping, and seeded restarts.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample, Split};
use crate::error::{Error, Result};
use crate::model::RayBasisModel;
use crate::train::adam::Adam;
use crate::train::config::TrainConfig;
use crate::train::loss::{data_loss, objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training objective per epoch.
    pub train_loss: Vec<f64>,
    /// Validation data term per epoch, penalties excluded.
    pub validation_loss: Vec<f64>,
    pub best_validation_loss: f64,
    /// Epoch of the returned snapshot; 0 is the initial model.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub chosen_restart: usize,
    /// Best validation loss of every restart; `None` if it diverged.
    pub restart_best_losses: Vec<Option<f64>>,
    pub final_params: Vec<f64>,
    /// Not serialized so reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

fn split_samples(dataset: &Dataset) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let train = dataset.samples(Split::Train);
    if train.is_empty() {
        return Err(Error::invalid("the training split is empty"));
    }
    let val = dataset.samples(Split::Validation);
    Ok((train, val))
}

/// Trains `model` on the training split, keeping the snapshot with the lowest
/// validation loss. Without a validation split the training data term is used.
pub fn train(model: RayBasisModel, dataset: &Dataset, config: &TrainConfig) -> Result<(RayBasisModel, TrainReport)> {
    train_tagged(model, dataset, config, 0)
}

fn train_tagged(
    mut model: RayBasisModel,
    dataset: &Dataset,
    config: &TrainConfig,
    restart: usize,
) -> Result<(RayBasisModel, TrainReport)> {
    let started = Instant::now();
    config.validate()?;
    model.validate()?;
    let (train_set, val_set) = split_samples(dataset)?;
    let val_ref: &[Sample] = if val_set.is_empty() { &train_set } else { &val_set };

    let lr: Vec<f64> = model.param_groups().into_iter().map(|g| config.learning_rate_for(g)).collect();
    let mut opt = Adam::new(lr, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut params = model.params();
    let mut grad = vec![0.0; params.len()];
    let mut batch = Vec::with_capacity(config.batch_size);

    let mut best_loss = data_loss(&model, val_ref, config.loss)?;
    if !best_loss.is_finite() {
        return Err(Error::Diverged { epoch: 0, reason: format!("initial validation loss is {best_loss}") });
    }
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            grad.iter_mut().for_each(|g| *g = 0.0);
            let parts = objective(&model, &batch, config, Some(&mut grad))?;
            let total = parts.total();
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, reason: format!("non-finite loss or gradient (loss {total})") });
            }
            epoch_total += total * batch.len() as f64;
            opt.step(&mut params, &grad);
            model.set_params(&params);
            model.project();
            params = model.params();
        }
        let train_loss = epoch_total / train_set.len() as f64;
        let val_loss = data_loss(&model, val_ref, config.loss)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, reason: format!("validation loss is {val_loss}") });
        }
        train_hist.push(train_loss);
        val_hist.push(val_loss);
        if config.verbose {
            eprintln!("restart {restart} epoch {epoch}: train {train_loss:.6e} validation {val_loss:.6e}");
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best_params.copy_from_slice(&params);
            best_epoch = epoch;
        } else if config.patience > 0 && epoch - best_epoch >= config.patience {
            break;
        }
    }

    model.set_params(&best_params);
    let report = TrainReport {
        epochs_run: train_hist.len(),
        train_loss: train_hist,
        validation_loss: val_hist,
        best_validation_loss: best_loss,
        best_epoch,
        chosen_restart: restart,
        restart_best_losses: vec![Some(best_loss)],
        final_params: best_params,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Index of the smallest loss, first on ties; `None` entries are skipped.
pub(crate) fn select_best(losses: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, l) in losses.iter().enumerate() {
        if let Some(l) = *l {
            if best.map_or(true, |(_, b)| l < b) {
                best = Some((i, l));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Runs `config.restarts` independent trainings, restart `i` using seed
/// `config.seed + i` for both the initial model and the batch order, and
/// returns the one with the lowest best validation loss.
pub fn multi_restart_train<F>(factory: F, dataset: &Dataset, config: &TrainConfig) -> Result<(RayBasisModel, TrainReport)>
where
    F: Fn(u64) -> Result<RayBasisModel> + Sync,
{
    config.validate()?;
    let started = Instant::now();
    let runs: Vec<Result<(RayBasisModel, TrainReport)>> = (0..config.restarts)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_add(i as u64);
            let cfg = TrainConfig { seed, ..config.clone() };
            train_tagged(factory(seed)?, dataset, &cfg, i)
        })
        .collect();

    let mut losses = Vec::with_capacity(runs.len());
    let mut first_err = None;
    for r in &runs {
        match r {
            Ok((_, rep)) => losses.push(Some(rep.best_validation_loss)),
            Err(e @ Error::Diverged { .. }) => {
                first_err.get_or_insert_with(|| e.to_string());
                losses.push(None);
            }
            Err(_) => {}
        }
    }
    // anything other than divergence is a configuration or data error
    let mut runs_ok = Vec::with_capacity(runs.len());
    for r in runs {
        match r {
            Ok(v) => runs_ok.push(Some(v)),
            Err(Error::Diverged { .. }) => runs_ok.push(None),
            Err(e) => return Err(e),
        }
    }
    let Some(best) = select_best(&losses) else {
        return Err(Error::AllRestartsDiverged { restarts: config.restarts, first: first_err.unwrap_or_default() });
    };
    let (model, mut report) = runs_ok.swap_remove(best).expect("selected restart succeeded");
    report.chosen_restart = best;
    report.restart_best_losses = losses;
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok((model, report))
}
