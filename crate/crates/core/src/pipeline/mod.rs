//! The epoch loop: patch sampling, clustering, reliability-weighted codebook
//! update, gradient training, early stopping and evaluation.

mod checkpoint;
mod config;
mod data;
mod epoch;
mod fit;
mod metrics;

pub use checkpoint::{read_history, write_history_line, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::{Ablation, TrainConfig};
pub use data::{sample_patches, stream_rng, Datasets, PreparedSplit, RngPurpose};
pub use epoch::{run_epoch, EpochReport, TrainState, WeightStats};
pub use fit::{fit, fit_prepared, EarlyStopping, FitResult, StopDecision, CHECKPOINT_FILE, HISTORY_FILE};
pub use metrics::{evaluate, evaluate_prepared, naive_metrics, Metrics};
