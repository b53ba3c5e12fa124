//! Codebook lifecycle: Lloyd clustering into a per-epoch pseudo codebook,
//! nearest-codeword quantization, reconstruction, the weighted incremental
//! update and the separation regularizer.

mod book;
mod lloyd;
mod separation;

pub use book::{
    incremental_update, init_codebook, nearest_codeword, quantize, quantize_rows, reconstruct, Codebook,
    PseudoCodebook, QuantizedSeries,
};
pub use lloyd::{
    alignment_warm_start, assign_labels, clustering_energy, kmeans_plus_plus, lloyd_cluster, update_centers,
    Assignment, ClusterResult, DEFAULT_LLOYD_MAX_ITERS,
};
pub use separation::{separation_gradient, separation_loss, separation_step};
