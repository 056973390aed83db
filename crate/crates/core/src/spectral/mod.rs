//! Spectral clustering baseline: subspace iteration, RatioCut trace,
//! normalized indicators and k-means rounding, plus a dense Jacobi
//! eigensolver used as a reference in tests.

mod jacobi;
mod kmeans;
mod metrics;
mod qr;
mod subspace;

pub use jacobi::{dense_eigh_oracle, DenseEigen, ORACLE_MAX_DIM};
pub use kmeans::{
    kmeans, kmeans_pp_seed, kmeans_round, lloyd, ClusterIndicator, KMeansResult, DEFAULT_LLOYD_ITERS, DEFAULT_RESTARTS,
};
pub use metrics::{clustering_accuracy, hungarian_max, ratiocut_trace};
pub use qr::{orthonormality_error, qr_orthonormalize};
pub use subspace::{projector_distance, subspace_iteration, EigenBasis, SubspaceOptions};
