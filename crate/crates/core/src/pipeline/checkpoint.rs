use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::config::TrainConfig;
use super::epoch::EpochReport;
use crate::codebook::Codebook;
use crate::error::{RecastError, Result};
use crate::forecaster::DualPathModel;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> RecastError {
    RecastError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything needed to forecast with a trained model, stored as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub format_version: u32,
    pub config: TrainConfig,
    /// [`TrainConfig::hash`] of `config`.
    pub config_hash: String,
    pub model: DualPathModel<T>,
    pub codebook: Codebook<T>,
    /// Epoch whose weights these are.
    pub epoch: usize,
    pub valid_mse: Option<f64>,
}

impl<T: Scalar + Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn new(config: &TrainConfig, model: DualPathModel<T>, codebook: Codebook<T>, epoch: usize, valid_mse: Option<f64>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: config.clone(),
            config_hash: config.hash(),
            model,
            codebook,
            epoch,
            valid_mse,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    /// Loads and checks version, config hash and model/codebook consistency.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let ckpt: Self = serde_json::from_str(&text)?;
        ckpt.check()?;
        Ok(ckpt)
    }

    fn check(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(RecastError::config(format!(
                "checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.config.hash() != self.config_hash {
            return Err(RecastError::config("checkpoint config hash does not match its config"));
        }
        let dims = self.config.model_dims()?;
        if dims != self.model.dims {
            return Err(RecastError::config("checkpoint model dims disagree with its config"));
        }
        if self.codebook.dim() != dims.codeword_dim || self.codebook.k() != dims.codebook_size {
            return Err(RecastError::Shape {
                context: "checkpoint codebook",
                left: vec![dims.codebook_size, dims.codeword_dim],
                right: self.codebook.codewords.shape().to_vec(),
            });
        }
        if self.model.quant_mlp.in_dim() != dims.quant_in()
            || self.model.quant_mlp.out_dim() != dims.quant_out()
            || self.model.res_mlp.in_dim() != dims.lookback
            || self.model.res_mlp.out_dim() != dims.horizon
        {
            return Err(RecastError::config("checkpoint network widths disagree with its dims"));
        }
        if !self.model.is_finite() {
            return Err(RecastError::NonFinite("checkpoint weights"));
        }
        Ok(())
    }
}

/// Appends one JSON record; creates the file if needed.
pub fn write_history_line(path: impl AsRef<Path>, report: &EpochReport) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let line = serde_json::to_string(report)?;
    writeln!(file, "{line}").map_err(|e| io_err(path, e))
}

pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<EpochReport>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
