//! Series ingestion, splitting, windowing, instance normalization and patching.

mod frame;
mod norm;
mod patch;
mod synth;
mod window;

pub use frame::{load_csv, save_csv, split_frame, CsvOptions, DatasetKind, SeriesFrame, TimestampColumn};
pub use norm::{instance_denormalize, instance_normalize, NormStats, DEFAULT_NORM_EPS};
pub use patch::{downsample, patchify, reduced_patches, unpatchify, upsample, PatchSet, Reduction};
pub use synth::{synth_generate, MotifPlacement, SynthOutput, SynthSpec};
pub use window::{make_windows, window_count, WindowPair};
