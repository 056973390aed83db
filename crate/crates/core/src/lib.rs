//! Semi-supervised node classification with soft-orthogonal graph neural
//! networks and self-supervised clustering.
//!
//! The crate is layered bottom-up:
//!
//! - [`numerics`]: dense matrices, a reverse-mode tape, Adam, seeded RNG.
//! - [`graph`]: CSR matrices, the dataset format, normalized operators, splits.
//! - [`spectral`]: subspace iteration, RatioCut trace, k-means rounding.
//! - [`model`]: soft-orthogonal message-passing layers and the prototype head.
//! - [`clustering`]: Student's-t assignments, target sharpening, KL and
//!   Sinkhorn pseudo-labels.
//! - [`trainer`]: the multi-task loop, evaluation, seeds and ablations.

pub mod clustering;
pub mod error;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
