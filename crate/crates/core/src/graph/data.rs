use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, Split};
use crate::numerics::DenseMatrix;

/// Undirected attributed graph with optional node labels.
///
/// The adjacency is symmetric with unit weights and never stores self-loops;
/// loops found in the source are dropped and remembered in
/// [`Graph::source_had_self_loops`].
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub name: String,
    adjacency: CsrMatrix,
    edge_count: usize,
    source_had_self_loops: bool,
    pub features: DenseMatrix,
    labels: Vec<Option<usize>>,
    class_count: usize,
    /// Split shipped with the dataset, if any.
    pub fixed_split: Option<Split>,
}

impl Graph {
    /// Build from an undirected edge list. Duplicates and reversed duplicates
    /// collapse to one edge.
    pub fn from_edges(
        name: impl Into<String>,
        n: usize,
        edges: &[(usize, usize)],
        features: DenseMatrix,
        labels: Vec<Option<usize>>,
        class_count: usize,
    ) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::dim("Graph::from_edges", format!("{} feature rows for {n} nodes", features.rows())));
        }
        if labels.len() != n {
            return Err(Error::dim("Graph::from_edges", format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some((i, c)) =
            labels.iter().enumerate().find_map(|(i, l)| l.filter(|&c| c >= class_count).map(|c| (i, c)))
        {
            return Err(Error::Contract(format!("node {i} has label {c} outside [0, {class_count})")));
        }
        let mut unique = BTreeSet::new();
        let mut loops = false;
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Contract(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            if a == b {
                loops = true;
                continue;
            }
            unique.insert((a.min(b), a.max(b)));
        }
        let mut triplets = Vec::with_capacity(2 * unique.len());
        for &(a, b) in &unique {
            triplets.push((a, b, 1.0));
            triplets.push((b, a, 1.0));
        }
        let adjacency = CsrMatrix::from_triplets(n, n, triplets)?;
        Ok(Self {
            name: name.into(),
            adjacency,
            edge_count: unique.len(),
            source_had_self_loops: loops,
            features,
            labels,
            class_count,
            fixed_split: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    /// Undirected edges, each counted once.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn source_had_self_loops(&self) -> bool {
        self.source_had_self_loops
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Option<usize> {
        self.labels[node]
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|i| self.adjacency.row_nnz(i)).collect()
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for i in 0..self.node_count() {
            let (cols, _) = self.adjacency.row(i);
            out.extend(cols.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// Node count per class (unlabeled nodes excluded).
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for l in self.labels.iter().flatten() {
            h[*l] += 1;
        }
        h
    }

    /// Divide each feature row by its L1 norm; all-zero rows stay zero.
    pub fn row_normalize_features(&mut self) {
        for i in 0..self.features.rows() {
            let row = self.features.row_mut(i);
            let l1: f64 = row.iter().map(|v| v.abs()).sum();
            if l1 > 0.0 {
                row.iter_mut().for_each(|v| *v /= l1);
            }
        }
    }
}

/// `D^{-1/2} A D^{-1/2}`, on `A + I` when `add_self_loops`. Zero-degree rows
/// come out as zero rows.
pub fn normalized_adjacency(g: &Graph, add_self_loops: bool) -> CsrMatrix {
    let a = g.adjacency();
    let n = a.rows();
    let loop_w = if add_self_loops { 1.0 } else { 0.0 };
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.row(i).1.iter().sum::<f64>() + loop_w;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut triplets = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((i, j, v * inv_sqrt[i] * inv_sqrt[j]));
        }
        if add_self_loops {
            triplets.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        }
    }
    CsrMatrix::from_triplets(n, n, triplets).expect("indices from a valid adjacency")
}

/// `I − D^{-1/2} A D^{-1/2}` on the loop-free adjacency.
pub fn normalized_laplacian(g: &Graph) -> CsrMatrix {
    let a_tilde = normalized_adjacency(g, false);
    let n = a_tilde.rows();
    let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for i in 0..n {
        let (cols, vals) = a_tilde.row(i);
        triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, -v)));
    }
    CsrMatrix::from_triplets(n, n, triplets).expect("indices from a valid adjacency")
}

/// Random-walk transition matrix `D^{-1} A`; isolated nodes get zero rows.
pub fn transition_matrix(g: &Graph) -> CsrMatrix {
    let a = g.adjacency();
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..a.rows() {
        let (cols, vals) = a.row(i);
        let d: f64 = vals.iter().sum();
        if d > 0.0 {
            triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v / d)));
        }
    }
    CsrMatrix::from_triplets(a.rows(), a.cols(), triplets).expect("indices from a valid adjacency")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges("t", n, edges, DenseMatrix::zeros(n, 1), vec![None; n], 1).unwrap()
    }

    #[test]
    fn triangle_has_six_stored_entries() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.adjacency().nnz(), 6);
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = graph(3, &[(0, 1), (1, 0), (0, 1), (1, 2), (2, 2)]);
        assert_eq!(g.edge_count(), 2);
        assert!(g.source_had_self_loops());
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn triangle_normalizations() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let plain = normalized_adjacency(&g, false);
        let looped = normalized_adjacency(&g, true);
        for i in 0..3 {
            for j in 0..3 {
                let expect_plain = if i == j { 0.0 } else { 0.5 };
                assert!((plain.get(i, j) - expect_plain).abs() < 1e-15);
                assert!((looped.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let lap = normalized_laplacian(&g);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { -0.5 };
                assert!((lap.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_node_cases() {
        let g = graph(1, &[]);
        assert_eq!(normalized_adjacency(&g, false).to_dense(), DenseMatrix::zeros(1, 1));
        assert_eq!(normalized_adjacency(&g, true).to_dense(), DenseMatrix::identity(1));
        assert_eq!(normalized_laplacian(&graph(4, &[])).to_dense(), DenseMatrix::identity(4));
    }

    #[test]
    fn labels_out_of_range_rejected() {
        let r = Graph::from_edges("t", 2, &[], DenseMatrix::zeros(2, 1), vec![Some(0), Some(3)], 2);
        assert!(r.is_err());
    }

    #[test]
    fn row_normalization_uses_l1() {
        let mut g =
            Graph::from_edges("t", 2, &[], DenseMatrix::from_rows(&[[1.0, 3.0], [0.0, 0.0]]), vec![None, None], 1)
                .unwrap();
        g.row_normalize_features();
        assert_eq!(g.features, DenseMatrix::from_rows(&[[0.25, 0.75], [0.0, 0.0]]));
    }
}
