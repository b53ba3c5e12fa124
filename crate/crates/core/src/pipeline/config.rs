use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{RecastError, Result};
use crate::forecaster::ModelDims;
use crate::nn::Activation;
use crate::reliability::WeightNorm;
use crate::series::{Reduction, DEFAULT_NORM_EPS};

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Residual path contributes nothing.
    NoResidual,
    /// Codebook frozen after the first epoch.
    NoUpdating,
    /// Cluster every patch at full resolution: no sampling, no pair pooling.
    NoRandom,
    /// All update weights equal to one.
    NoScoring,
    /// Plain mean of the three scores instead of the robust softmin.
    NoDro,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::NoResidual,
        Ablation::NoUpdating,
        Ablation::NoRandom,
        Ablation::NoScoring,
        Ablation::NoDro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoResidual => "no_residual",
            Ablation::NoUpdating => "no_updating",
            Ablation::NoRandom => "no_random",
            Ablation::NoScoring => "no_scoring",
            Ablation::NoDro => "no_dro",
        }
    }
}

impl FromStr for Ablation {
    type Err = RecastError;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| RecastError::config(format!("unknown ablation {s:?}")))
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every knob of a training run. Serializes to a flat `key = value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub patch_len: usize,
    pub codebook_size: usize,
    pub gamma: f64,
    pub w_sep: f64,
    pub lr: f64,
    pub sample_ratio: f64,
    pub eps: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lloyd_max_iters: usize,
    pub stride: usize,
    pub ablations: BTreeSet<Ablation>,
    pub weight_norm: WeightNorm,
    pub quant_hidden: usize,
    pub res_hidden: usize,
    pub activation: Activation,
    /// Weight of the auxiliary future-codeword regression loss; 0 disables it.
    pub aux_weight: f64,
    /// Separation gradient steps applied to each epoch's cluster centers.
    pub sep_steps: usize,
    /// Also thin the gradient-training windows by `sample_ratio`.
    pub sample_training: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lookback: 96,
            horizon: 96,
            patch_len: 16,
            codebook_size: 8,
            gamma: 1.0,
            w_sep: 0.1,
            lr: 3e-4,
            sample_ratio: 0.5,
            eps: DEFAULT_NORM_EPS,
            epochs: 30,
            patience: 5,
            batch_size: 32,
            seed: 2024,
            lloyd_max_iters: crate::codebook::DEFAULT_LLOYD_MAX_ITERS,
            stride: 1,
            ablations: BTreeSet::new(),
            weight_norm: WeightNorm::MeanOne,
            quant_hidden: 32,
            res_hidden: 512,
            activation: Activation::Relu,
            aux_weight: 0.0,
            sep_steps: 1,
            sample_training: false,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| RecastError::config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(RecastError::config(format!("invalid value {value:?} for {key}"))),
    }
}

impl TrainConfig {
    /// Canonical keys, in the order [`TrainConfig::to_kv`] writes them.
    pub const KEYS: [&'static str; 23] = [
        "lookback",
        "horizon",
        "patch_len",
        "codebook_size",
        "gamma",
        "w_sep",
        "lr",
        "sample_ratio",
        "eps",
        "epochs",
        "patience",
        "batch_size",
        "seed",
        "lloyd_max_iters",
        "stride",
        "ablations",
        "weight_norm",
        "quant_hidden",
        "res_hidden",
        "activation",
        "aux_weight",
        "sep_steps",
        "sample_training",
    ];

    pub fn has(&self, ablation: Ablation) -> bool {
        self.ablations.contains(&ablation)
    }

    /// Sets one field. Short aliases (`L`, `H`, `Lp`, `K`, `wsep`, `batch`) are accepted.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "lookback" | "L" => self.lookback = parse(key, value)?,
            "horizon" | "H" => self.horizon = parse(key, value)?,
            "patch_len" | "Lp" => self.patch_len = parse(key, value)?,
            "codebook_size" | "K" => self.codebook_size = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "w_sep" | "wsep" => self.w_sep = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "sample_ratio" => self.sample_ratio = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "batch_size" | "batch" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lloyd_max_iters" => self.lloyd_max_iters = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "ablations" | "ablation" => {
                self.ablations = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(Ablation::from_str)
                    .collect::<Result<_>>()?
            }
            "weight_norm" => self.weight_norm = value.parse()?,
            "quant_hidden" => self.quant_hidden = parse(key, value)?,
            "res_hidden" => self.res_hidden = parse(key, value)?,
            "activation" => self.activation = value.parse()?,
            "aux_weight" => self.aux_weight = parse(key, value)?,
            "sep_steps" => self.sep_steps = parse(key, value)?,
            "sample_training" => self.sample_training = parse_bool(key, value)?,
            other => return Err(RecastError::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| RecastError::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| RecastError::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        let ablations: Vec<&str> = self.ablations.iter().map(|a| a.name()).collect();
        let values = [
            self.lookback.to_string(),
            self.horizon.to_string(),
            self.patch_len.to_string(),
            self.codebook_size.to_string(),
            format!("{:?}", self.gamma),
            format!("{:?}", self.w_sep),
            format!("{:?}", self.lr),
            format!("{:?}", self.sample_ratio),
            format!("{:?}", self.eps),
            self.epochs.to_string(),
            self.patience.to_string(),
            self.batch_size.to_string(),
            self.seed.to_string(),
            self.lloyd_max_iters.to_string(),
            self.stride.to_string(),
            ablations.join(","),
            self.weight_norm.to_string(),
            self.quant_hidden.to_string(),
            self.res_hidden.to_string(),
            self.activation.to_string(),
            format!("{:?}", self.aux_weight),
            self.sep_steps.to_string(),
            self.sample_training.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical `key = value` text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv().as_bytes()))
    }

    pub fn reduction(&self) -> Reduction {
        if self.has(Ablation::NoRandom) {
            Reduction::Keep
        } else {
            Reduction::Halve
        }
    }

    pub fn model_dims(&self) -> Result<ModelDims> {
        ModelDims::new(
            self.lookback,
            self.horizon,
            self.patch_len,
            self.codebook_size,
            self.reduction(),
            self.eps,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.model_dims()?;
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("lloyd_max_iters", self.lloyd_max_iters),
            ("stride", self.stride),
            ("quant_hidden", self.quant_hidden),
            ("res_hidden", self.res_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(RecastError::config(format!("{name} must be positive")));
            }
        }
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return Err(RecastError::config(format!(
                "sample_ratio must lie in (0, 1], got {}",
                self.sample_ratio
            )));
        }
        for (name, v) in [("gamma", self.gamma), ("lr", self.lr), ("eps", self.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RecastError::config(format!("{name} must be positive and finite")));
            }
        }
        for (name, v) in [("w_sep", self.w_sep), ("aux_weight", self.aux_weight)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RecastError::config(format!("{name} must be non-negative and finite")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.lookback, cfg.patch_len, cfg.codebook_size), (96, 16, 8));
        assert_eq!((cfg.epochs, cfg.patience, cfg.batch_size), (30, 5, 32));
        assert_eq!((cfg.lr, cfg.sample_ratio, cfg.gamma, cfg.w_sep), (3e-4, 0.5, 1.0, 0.1));
    }

    #[test]
    fn kv_roundtrip() {
        let mut cfg = TrainConfig::default();
        cfg.set("K", "16").unwrap();
        cfg.set("ablations", "no_dro, no_residual").unwrap();
        cfg.set("weight_norm", "sum_one").unwrap();
        cfg.set("lr", "0.001").unwrap();
        cfg.set("sample_training", "true").unwrap();
        let back = TrainConfig::from_kv_text(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert!(back.has(Ablation::NoDro) && back.has(Ablation::NoResidual));
    }

    #[test]
    fn every_field_has_a_key() {
        let kv = TrainConfig::default().to_kv();
        for key in TrainConfig::KEYS {
            assert!(kv.contains(&format!("{key} = ")));
        }
        let json = serde_json::to_value(TrainConfig::default()).unwrap();
        assert_eq!(json.as_object().unwrap().len(), TrainConfig::KEYS.len());
    }

    #[test]
    fn comments_and_unknown_keys() {
        let cfg = TrainConfig::from_kv_text("# run\nL = 48\n\nH=24 # short\n").unwrap();
        assert_eq!((cfg.lookback, cfg.horizon), (48, 24));
        assert!(TrainConfig::from_kv_text("bogus = 1").is_err());
        assert!(TrainConfig::from_kv_text("L 48").is_err());
        assert!(TrainConfig::from_kv_text("ablations = no_magic").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_invalid_values() {
        for (k, v) in [("sample_ratio", "0"), ("sample_ratio", "1.5"), ("gamma", "0"), ("Lp", "15"), ("epochs", "0")] {
            let mut cfg = TrainConfig::default();
            cfg.set(k, v).unwrap();
            assert!(cfg.validate().is_err(), "{k}={v}");
        }
    }

    #[test]
    fn no_random_keeps_full_resolution() {
        let mut cfg = TrainConfig::default();
        cfg.ablations.insert(Ablation::NoRandom);
        assert_eq!(cfg.model_dims().unwrap().codeword_dim, 16);
    }
}
