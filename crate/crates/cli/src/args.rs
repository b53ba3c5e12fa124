use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use recast::pipeline::TrainConfig;
use recast::series::DatasetKind;

#[derive(Debug, Parser)]
#[command(name = "recast", version, about = "Reliability-aware codebook-assisted time-series forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per horizon and report test metrics.
    Train(TrainArgs),
    /// Score trained checkpoints on a data split.
    Eval(EvalArgs),
    /// Forecast the horizon after the last lookback window of a file.
    Forecast(ForecastArgs),
    /// Dump a checkpoint's codewords and their usage on a dataset.
    InspectCodebook(InspectArgs),
    /// Write a synthetic motif dataset.
    Synth(SynthArgs),
    /// Run the numerical self-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Ett,
    Other,
}

impl From<Kind> for DatasetKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ett => DatasetKind::Ett,
            Kind::Other => DatasetKind::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file, one column per channel with an optional leading `date` column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "other")]
    pub kind: Kind,
}

/// Training hyperparameters. Precedence: these flags, then `--config`, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` file; every training option has a key.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Lookback length.
    #[arg(long = "L")]
    pub lookback: Option<usize>,
    /// Patch length (even).
    #[arg(long = "Lp")]
    pub patch_len: Option<usize>,
    /// Number of codewords.
    #[arg(long = "K")]
    pub codebook_size: Option<usize>,
    /// Robust fusion temperature.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Separation loss weight.
    #[arg(long = "wsep")]
    pub w_sep: Option<f64>,
    /// Base learning rate of the cosine schedule.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Non-improving validation epochs tolerated before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Fraction of patches clustered each epoch.
    #[arg(long = "sample-ratio")]
    pub sample_ratio: Option<f64>,
    /// Minibatch size in windows.
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    /// Seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// no_residual, no_updating, no_random, no_scoring or no_dro; repeatable.
    #[arg(long = "ablation")]
    pub ablations: Vec<String>,
    /// Update weight normalization: mean_one or sum_one.
    #[arg(long = "weight-norm")]
    pub weight_norm: Option<String>,
    /// Any other option as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    /// Defaults, overlaid by the config file, overlaid by explicit flags.
    pub fn resolve(&self, horizon: Option<usize>) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_kv_text(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
        }
        for (key, value) in self.explicit(horizon) {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// `(key, value)` for every flag given on the command line.
    pub fn explicit(&self, horizon: Option<usize>) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        push("lookback", self.lookback.map(|v| v.to_string()));
        push("horizon", horizon.map(|v| v.to_string()));
        push("patch_len", self.patch_len.map(|v| v.to_string()));
        push("codebook_size", self.codebook_size.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("w_sep", self.w_sep.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        push("sample_ratio", self.sample_ratio.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        if !self.ablations.is_empty() {
            push("ablations", Some(self.ablations.join(",")));
        }
        push("weight_norm", self.weight_norm.clone());
        for kv in &self.overrides {
            match kv.split_once('=') {
                Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
                None => out.push((kv.clone(), String::new())),
            }
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Forecast horizon; repeat to train one model per horizon.
    #[arg(long = "H")]
    pub horizons: Vec<usize>,
    /// Output directory for checkpoints, histories and metrics.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint file; repeat to score several horizons.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Horizons to score; each must match a supplied checkpoint.
    #[arg(long = "H")]
    pub horizons: Vec<usize>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: Split,
    /// Hyperparameter flags; any given must agree with the checkpoint.
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Directory for `eval.jsonl`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV destination; printed to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset whose patches are counted per codeword.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "other")]
    pub kind: Kind,
    #[arg(long, value_enum, default_value = "train")]
    pub split: Split,
    /// Directory for `codebook.csv` and `usage.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    #[arg(long, default_value_t = 3000)]
    pub length: usize,
    /// Motif occurrences; one per 50 steps when absent.
    #[arg(long)]
    pub motifs: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite to run; repeatable. Runs every suite when absent.
    #[arg(long = "suite")]
    pub suites: Vec<String>,
    /// Keep going after a failing suite.
    #[arg(long)]
    pub all: bool,
    /// Perturb the robust fusion to confirm the checks can fail.
    #[arg(long = "inject-fault")]
    pub inject_fault: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
