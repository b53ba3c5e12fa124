//! Per-codeword reliability scores and their robust fusion into update weights.

mod fusion;
mod scores;

pub use fusion::{
    dro_fuse, fuse_and_normalize, fuse_with, kl_ball_oracle, FusionRule, OracleResult, ReliabilityWeights, WeightNorm,
    DEFAULT_GAMMA, DEFAULT_ORACLE_RESOLUTION,
};
pub use scores::{score_delta, score_je, score_rep, score_triples, ScoreTriple};
