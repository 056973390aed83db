//! Self-supervised clustering signals: Student's-t soft assignments, the
//! sharpened target and its KL loss, and Sinkhorn pseudo-labels with their
//! cross-entropy.

mod assign;
mod sinkhorn;

pub use assign::{
    init_centroids, kl_loss, soft_assign, soft_assign_on_tape, target_distribution, ClusterState, CENTROID_LLOYD_ITERS,
};
pub use sinkhorn::{pseudo_label_loss, sinkhorn_plan, sinkhorn_plan_direct, sinkhorn_pseudo_labels, PseudoLabels};
