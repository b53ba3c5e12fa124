use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use super::checkpoint::{write_history_line, Checkpoint};
use super::config::TrainConfig;
use super::data::{Datasets, PreparedSplit};
use super::epoch::{run_epoch, EpochReport, TrainState};
use crate::codebook::Codebook;
use crate::error::{RecastError, Result};
use crate::forecaster::DualPathModel;
use crate::scalar::Scalar;

pub const HISTORY_FILE: &str = "history.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Patience rule on validation MSE: only a strict improvement resets the count.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, valid_mse: f64) -> StopDecision {
        let improved = self.best.is_none_or(|b| valid_mse < b);
        if improved {
            self.best = Some(valid_mse);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        StopDecision {
            improved,
            stop: self.stale > self.patience,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    /// Weights of the best validation epoch.
    pub model: DualPathModel<T>,
    /// Codebook of the best validation epoch.
    pub codebook: Codebook<T>,
    pub history: Vec<EpochReport>,
    pub best_epoch: usize,
    pub best_valid_mse: f64,
}

/// Trains for up to `config.epochs` epochs, keeping the epoch with the lowest
/// validation MSE. Stops once more than `patience` consecutive epochs fail to
/// improve on it.
///
/// With `out_dir`, the history is written one record per epoch and the
/// checkpoint is rewritten on every improvement.
pub fn fit_prepared<T: Scalar + Serialize + DeserializeOwned>(
    train: &PreparedSplit<T>,
    valid: &PreparedSplit<T>,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<FitResult<T>> {
    if valid.is_empty() {
        return Err(RecastError::data("no validation windows"));
    }
    if train.is_empty() {
        return Err(RecastError::data("no training windows"));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| RecastError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let history = dir.join(HISTORY_FILE);
        if history.exists() {
            fs::remove_file(&history).map_err(|e| RecastError::Io {
                path: history.clone(),
                source: e,
            })?;
        }
    }

    let mut state = TrainState::new(config)?;
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, DualPathModel<T>, Codebook<T>)> = None;
    let mut stopping = EarlyStopping::new(config.patience);
    while state.epoch < config.epochs {
        let report = run_epoch(&mut state, train, Some(valid), config)?;
        let mse = report.valid_mse.expect("validation split supplied");
        if !mse.is_finite() {
            return Err(RecastError::NonFinite("validation mse"));
        }
        if let Some(dir) = out_dir {
            write_history_line(dir.join(HISTORY_FILE), &report)?;
        }
        let decision = stopping.observe(mse);
        let codebook = state.codebook.clone().expect("codebook exists after an epoch");
        history.push(report);
        if decision.improved {
            if let Some(dir) = out_dir {
                Checkpoint::new(config, state.model.clone(), codebook.clone(), state.epoch, Some(mse))
                    .save(dir.join(CHECKPOINT_FILE))?;
            }
            best = Some((state.epoch, mse, state.model.clone(), codebook));
        } else if decision.stop {
            break;
        }
    }
    let (best_epoch, best_valid_mse, model, codebook) = best.expect("at least one epoch runs");
    Ok(FitResult {
        model,
        codebook,
        history,
        best_epoch,
        best_valid_mse,
    })
}

/// Windows each split with `config.stride` and trains on it.
pub fn fit<T: Scalar + Serialize + DeserializeOwned>(
    data: &Datasets<T>,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<FitResult<T>> {
    config.validate()?;
    let dims = config.model_dims()?;
    let train = PreparedSplit::from_frame(&data.train, &dims, config.stride)?;
    let valid = PreparedSplit::from_frame(&data.valid, &dims, 1)?;
    fit_prepared(&train, &valid, config, out_dir)
}
