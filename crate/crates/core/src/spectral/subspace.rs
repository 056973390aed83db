use nalgebra::{DMatrix, SymmetricEigen};

use super::qr::qr_orthonormalize;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::numerics::{DenseMatrix, RngState};

#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub q: DenseMatrix,
    /// Descending.
    pub ritz_values: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SubspaceOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block columns beyond `k`; `None` means `k`. Capped at `n − k`.
    pub oversample: Option<usize>,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000, oversample: None }
    }
}

/// Block power iteration for the `k` algebraically largest eigenpairs of a
/// symmetric sparse matrix.
///
/// The iteration runs on `A + σI` with `σ` above the spectral radius so that
/// the dominant subspace is the top of the algebraic spectrum. Each step
/// multiplies, re-orthonormalizes and rotates the block onto its Ritz vectors.
/// Convergence is the Frobenius distance between successive top-`k`
/// projectors, which ignores column sign flips and rotations inside
/// degenerate eigenspaces.
pub fn subspace_iteration(
    a_tilde: &CsrMatrix,
    k: usize,
    opts: &SubspaceOptions,
    rng: &mut RngState,
) -> Result<EigenBasis> {
    let n = a_tilde.rows();
    if a_tilde.cols() != n {
        return Err(Error::dim("subspace_iteration", format!("non-square {n}x{}", a_tilde.cols())));
    }
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("subspace_iteration needs 1 <= k <= n, got k={k}, n={n}")));
    }
    if !a_tilde.is_symmetric(1e-12) {
        return Err(Error::Contract("subspace_iteration needs a symmetric matrix".into()));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Parameter("subspace_iteration needs tol > 0 and max_iter >= 1".into()));
    }

    let block = k + opts.oversample.unwrap_or(k).min(n - k);
    let radius = (0..n).map(|i| a_tilde.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let shift = (1.01 * radius).max(1e-3);

    let start = DenseMatrix::from_fn(n, block, |_, _| rng.normal());
    let (mut q, mut ritz) = rayleigh_ritz(a_tilde, &qr_orthonormalize(&start)?)?;
    let mut prev = leading_columns(&q, k);
    let mut iterations_used = 0;
    let mut converged = false;

    for t in 1..=opts.max_iter {
        let mut y = a_tilde.matmul_dense(&q)?;
        y.add_assign(&q.scale(shift))?;
        let basis = qr_orthonormalize(&y)?;
        (q, ritz) = rayleigh_ritz(a_tilde, &basis)?;
        let current = leading_columns(&q, k);
        let delta = projector_distance(&prev, &current);
        prev = current;
        iterations_used = t;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    let mut q = prev;
    fix_signs(&mut q);
    ritz.truncate(k);
    Ok(EigenBasis { q, ritz_values: ritz, iterations_used, converged })
}

/// Rotate an orthonormal block onto the eigenvectors of its projected matrix,
/// sorted by descending Ritz value.
fn rayleigh_ritz(a: &CsrMatrix, q: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let aq = a.matmul_dense(q)?;
    let t = q.t_matmul(&aq)?;
    let b = t.rows();
    let sym = DMatrix::from_fn(b, b, |i, j| 0.5 * (t.get(i, j) + t.get(j, i)));
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let v = DenseMatrix::from_fn(b, b, |i, j| eig.eigenvectors[(i, order[j])]);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((q.matmul(&v)?, values))
}

fn leading_columns(q: &DenseMatrix, k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(q.rows(), k, |i, j| q.get(i, j))
}

/// `‖Q1Q1ᵀ − Q2Q2ᵀ‖_F` for orthonormal `Q1`, `Q2` with equal column count,
/// without forming the `n × n` projectors.
pub fn projector_distance(q1: &DenseMatrix, q2: &DenseMatrix) -> f64 {
    let k = q1.cols() as f64;
    let overlap = q1.t_matmul(q2).expect("same row count").frobenius_sq();
    (2.0 * k - 2.0 * overlap).max(0.0).sqrt()
}

/// Make the largest-magnitude entry of every column positive.
fn fix_signs(q: &mut DenseMatrix) {
    for j in 0..q.cols() {
        let col = q.column(j);
        let pivot = col.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            for i in 0..q.rows() {
                q.set(i, j, -q.get(i, j));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, normalized_laplacian, Graph};
    use crate::spectral::jacobi::dense_eigh_oracle;
    use crate::spectral::qr::orthonormality_error;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges("t", n, edges, DenseMatrix::zeros(n, 1), vec![None; n], 1).unwrap()
    }

    fn random_symmetric(n: usize, rng: &mut RngState) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.uniform_in(-1.0, 1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[test]
    fn triangle_dominant_vector() {
        let a = normalized_adjacency(&graph(3, &[(0, 1), (1, 2), (0, 2)]), false);
        let e = subspace_iteration(&a, 1, &SubspaceOptions::default(), &mut RngState::new(1)).unwrap();
        assert!(e.converged);
        assert!((e.ritz_values[0] - 1.0).abs() < 1e-12);
        let expect = 1.0 / 3f64.sqrt();
        for i in 0..3 {
            assert!((e.q.get(i, 0) - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn two_triangles_span_component_indicators() {
        let g = graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let a = normalized_adjacency(&g, false);
        let e = subspace_iteration(&a, 2, &SubspaceOptions::default(), &mut RngState::new(2)).unwrap();
        assert!(e.converged);
        for v in &e.ritz_values {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let s = 1.0 / 3f64.sqrt();
        let indicators = DenseMatrix::from_fn(6, 2, |i, j| if i / 3 == j { s } else { 0.0 });
        assert!(projector_distance(&e.q, &indicators) < 1e-6);
    }

    #[test]
    fn random_8x8_against_oracle() {
        let mut rng = RngState::new(3);
        let m = random_symmetric(8, &mut rng);
        let oracle = dense_eigh_oracle(&m).unwrap();
        let e = subspace_iteration(&CsrMatrix::from_dense(&m), 3, &SubspaceOptions::default(), &mut rng).unwrap();
        let top = leading_columns(&oracle.vectors, 3);
        assert!(projector_distance(&e.q, &top) < 1e-6);
        for j in 0..3 {
            assert!((e.ritz_values[j] - oracle.values[j]).abs() < 1e-6);
        }
        assert!(orthonormality_error(&e.q) < 1e-8);
    }

    #[test]
    fn adjacency_top_matches_laplacian_bottom() {
        let g = graph(7, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 6), (6, 4)]);
        let a = normalized_adjacency(&g, false);
        let l = normalized_laplacian(&g);
        let ea = dense_eigh_oracle(&a.to_dense()).unwrap();
        let el = dense_eigh_oracle(&l.to_dense()).unwrap();
        for i in 0..7 {
            assert!((ea.values[i] - (1.0 - el.values[6 - i])).abs() < 1e-10);
        }
        let e = subspace_iteration(&a, 2, &SubspaceOptions::default(), &mut RngState::new(4)).unwrap();
        let bottom_l = DenseMatrix::from_fn(7, 2, |i, j| el.vectors.get(i, 6 - j));
        assert!(projector_distance(&e.q, &bottom_l) < 1e-6);
    }

    #[test]
    fn negative_spectrum_is_not_preferred() {
        // diag(-5, 1, 0.5): largest magnitude is -5 but largest algebraic is 1
        let m = DenseMatrix::from_rows(&[[-5.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]);
        let e = subspace_iteration(&CsrMatrix::from_dense(&m), 1, &SubspaceOptions::default(), &mut RngState::new(5))
            .unwrap();
        assert!((e.ritz_values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let mut rng = RngState::new(6);
        let m = random_symmetric(12, &mut rng);
        let opts = SubspaceOptions { tol: 1e-300, max_iter: 3, oversample: Some(0) };
        let e = subspace_iteration(&CsrMatrix::from_dense(&m), 2, &opts, &mut rng).unwrap();
        assert!(!e.converged);
        assert_eq!(e.iterations_used, 3);
        assert!(orthonormality_error(&e.q) < 1e-8);
    }

    #[test]
    fn rejects_bad_k() {
        let a = CsrMatrix::identity(3);
        let mut rng = RngState::new(0);
        assert!(subspace_iteration(&a, 0, &SubspaceOptions::default(), &mut rng).is_err());
        assert!(subspace_iteration(&a, 4, &SubspaceOptions::default(), &mut rng).is_err());
    }
}
