use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::numerics::DenseMatrix;

/// `Tr(Hᵀ L H)` without forming `L H` beyond one sparse product.
pub fn ratiocut_trace(h: &DenseMatrix, l_tilde: &CsrMatrix) -> Result<f64> {
    if l_tilde.cols() != h.rows() || l_tilde.rows() != h.rows() {
        return Err(Error::dim(
            "ratiocut_trace",
            format!("operator {}x{} vs {} rows", l_tilde.rows(), l_tilde.cols(), h.rows()),
        ));
    }
    let lh = l_tilde.matmul_dense(h)?;
    Ok(h.as_slice().iter().zip(lh.as_slice()).map(|(a, b)| a * b).sum())
}

/// Maximum-weight perfect matching on a square matrix. Returns
/// `assignment[row] = column`. O(n³) shortest augmenting paths.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    // minimise cost = -weight; 1-based potentials as in the classic formulation
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of labeled nodes whose cluster maps to their class under the best
/// one-to-one relabeling. Unlabeled entries are skipped.
pub fn clustering_accuracy(pred: &[usize], truth: &[Option<usize>]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dim("clustering_accuracy", format!("{} predictions vs {} labels", pred.len(), truth.len())));
    }
    let pairs: Vec<(usize, usize)> = pred.iter().zip(truth).filter_map(|(&p, t)| t.map(|t| (p, t))).collect();
    if pairs.is_empty() {
        return Err(Error::Contract("clustering_accuracy needs at least one labeled node".into()));
    }
    let size = pairs.iter().map(|&(p, t)| p.max(t) + 1).max().unwrap_or(1);
    let mut counts = vec![vec![0.0; size]; size];
    for &(p, t) in &pairs {
        counts[p][t] += 1.0;
    }
    let matching = hungarian_max(&counts);
    let hits: f64 = matching.iter().enumerate().map(|(p, &t)| counts[p][t]).sum();
    Ok(hits / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_laplacian, Graph};
    use crate::numerics::RngState;

    fn six_node_fixture() -> Graph {
        let edges = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5), (1, 4)];
        Graph::from_edges("six", 6, &edges, DenseMatrix::zeros(6, 1), vec![None; 6], 1).unwrap()
    }

    fn edge_sum(g: &Graph, h: &DenseMatrix) -> f64 {
        let deg = g.degrees();
        g.edges()
            .iter()
            .map(|&(i, j)| {
                let (si, sj) = ((deg[i] as f64).sqrt(), (deg[j] as f64).sqrt());
                (0..h.cols()).map(|c| (h.get(i, c) / si - h.get(j, c) / sj).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn ratiocut_matches_edge_sum() {
        let g = six_node_fixture();
        let l = normalized_laplacian(&g);
        let mut rng = RngState::new(8);
        for _ in 0..20 {
            let h = DenseMatrix::from_fn(6, 3, |_, _| rng.normal());
            let got = ratiocut_trace(&h, &l).unwrap();
            assert!((got - edge_sum(&g, &h)).abs() < 1e-10);
            assert!(got >= -1e-10);
        }
    }

    #[test]
    fn disconnected_indicator_has_zero_cut() {
        let g = Graph::from_edges(
            "two",
            6,
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
            DenseMatrix::zeros(6, 1),
            vec![None; 6],
            1,
        )
        .unwrap();
        let s = 1.0 / 3f64.sqrt();
        let c = DenseMatrix::from_fn(6, 2, |i, j| if i / 3 == j { s } else { 0.0 });
        assert!(ratiocut_trace(&c, &normalized_laplacian(&g)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn degree_root_vector_is_in_the_kernel() {
        let g = six_node_fixture();
        let h = DenseMatrix::from_fn(6, 1, |i, _| (g.degrees()[i] as f64).sqrt());
        assert!(ratiocut_trace(&h, &normalized_laplacian(&g)).unwrap().abs() < 1e-12);
        let ones = DenseMatrix::filled(6, 1, 1.0);
        assert!(ratiocut_trace(&ones, &normalized_laplacian(&g)).unwrap() > 0.0);
    }

    #[test]
    fn ratiocut_shape_mismatch() {
        let l = normalized_laplacian(&six_node_fixture());
        assert!(matches!(ratiocut_trace(&DenseMatrix::zeros(5, 2), &l), Err(Error::Dimension { .. })));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn hungarian_matches_permutation_search() {
        let mut rng = RngState::new(21);
        for n in 1..=6 {
            for _ in 0..10 {
                let w: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.below(10) as f64).collect()).collect();
                let best = permutations(n)
                    .iter()
                    .map(|p| p.iter().enumerate().map(|(i, &j)| w[i][j]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let m = hungarian_max(&w);
                let got: f64 = m.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
                assert_eq!(got, best);
                let mut cols = m.clone();
                cols.sort();
                assert_eq!(cols, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let truth: Vec<Option<usize>> = vec![Some(0), Some(0), Some(1), Some(1), Some(2), None];
        assert_eq!(clustering_accuracy(&[2, 2, 0, 0, 1, 1], &truth).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 2, 0, 1, 1, 0], &truth).unwrap(), 0.8);
    }
}
