//! Dense neural-network kernel: MLPs with manual backpropagation, L1 loss,
//! Adam, cosine annealing and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod loss;
mod mlp;
mod schedule;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use loss::l1_loss;
pub use mlp::{Activation, DenseLayer, Mlp, MlpCache, MlpGrads};
pub use schedule::cosine_lr;
