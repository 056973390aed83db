//! Stochastic block model fixtures with class-informative features.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{DenseMatrix, RngState};

#[derive(Clone, Debug)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Offset added to the feature coordinate owned by a node's block.
    pub feature_signal: f64,
    /// Standard deviation of the Gaussian feature noise.
    pub feature_noise: f64,
}

impl SbmConfig {
    pub fn new(block_sizes: Vec<usize>, p_in: f64, p_out: f64) -> Self {
        let k = block_sizes.len();
        Self { block_sizes, p_in, p_out, feature_dim: (2 * k).max(4), feature_signal: 1.0, feature_noise: 0.5 }
    }
}

/// Sample a labeled SBM graph; node `i`'s label is its block index.
pub fn stochastic_block_model(cfg: &SbmConfig, rng: &mut RngState) -> Result<Graph> {
    let k = cfg.block_sizes.len();
    if k == 0 || cfg.feature_dim < k {
        return Err(Error::Parameter("need at least one block and feature_dim >= blocks".into()));
    }
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let labels: Vec<usize> = cfg.block_sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            if rng.uniform() < p {
                edges.push((i, j));
            }
        }
    }
    let features = DenseMatrix::from_fn(n, cfg.feature_dim, |i, j| {
        let signal = if j == labels[i] { cfg.feature_signal } else { 0.0 };
        signal + cfg.feature_noise * rng.normal()
    });
    Graph::from_edges(format!("sbm{k}x{n}"), n, &edges, features, labels.into_iter().map(Some).collect(), k)
}
