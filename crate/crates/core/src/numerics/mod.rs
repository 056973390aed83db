//! Dense arithmetic, reverse-mode differentiation, seeded randomness and the
//! Adam update.

mod adam;
mod dense;
pub mod gradcheck;
pub mod ops;
mod param;
mod rng;
mod tape;

pub use adam::AdamState;
pub use dense::{gemm, is_deterministic, set_deterministic, DenseMatrix};
pub use param::{ParamId, ParamStore, Parameter};
pub use rng::RngState;
pub use tape::{Tape, Var};
