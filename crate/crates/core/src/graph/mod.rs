//! Graph data model, normalized operators, dataset ingestion and splits.

mod csr;
mod data;
pub mod io;
mod split;
pub mod synthetic;

pub use csr::CsrMatrix;
pub use data::{normalized_adjacency, normalized_laplacian, transition_matrix, Graph};
pub use io::{load_dataset, write_dataset, DatasetMeta, LoadOptions};
pub use split::{make_split, Split, SplitConfig, SplitPolicy};
