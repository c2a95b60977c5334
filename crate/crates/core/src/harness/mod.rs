//! Experiment harness: synthetic datasets, pairwise distance matrices,
//! agreement metrics and classification.

pub mod data;
pub mod eval;
pub mod pairwise;

pub use data::{
    corrupt_with_noise, disk_ring_dataset, ellipse_dataset, gen_ellipses, manifest_path, Dataset,
    Manifest, ManifestEntry,
};
pub use eval::{
    eval_mre_pcc, export_kernel, kernel_matrix, knn_classify, nearest_neighbor_accuracy, pearson,
    EvalReport, KnnReport, PairRow, DEFAULT_FLOOR,
};
pub use pairwise::{pairwise, DistanceMatrix, Method, PairwiseConfig};
