use proptest::prelude::*;

use ncgc::clustering::{kl_loss, sinkhorn_plan, soft_assign, target_distribution};
use ncgc::graph::io::{load_dataset, write_dataset, LoadOptions};
use ncgc::graph::{normalized_adjacency, normalized_laplacian, Graph};
use ncgc::numerics::{ops, DenseMatrix, RngState, Tape};
use ncgc::spectral::{
    dense_eigh_oracle, kmeans_pp_seed, lloyd, orthonormality_error, projector_distance, ratiocut_trace,
    subspace_iteration, ClusterIndicator, SubspaceOptions,
};

fn matrix(
    rows: std::ops::RangeInclusive<usize>,
    cols: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
    })
}

/// Random undirected graph on 2..=max_n nodes with f32-exact features and a
/// label on every node.
fn graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let edges = prop::collection::vec((0..n, 0..n), 0..3 * n);
        let feats = prop::collection::vec(-4i32..4, n * 3);
        let labels = prop::collection::vec(0usize..2, n);
        (edges, feats, labels).prop_map(move |(e, f, l)| {
            let e: Vec<_> = e.into_iter().filter(|(a, b)| a != b).collect();
            let x = DenseMatrix::new(n, 3, f.into_iter().map(|v| f64::from(v) * 0.25).collect()).unwrap();
            Graph::from_edges("g", n, &e, x, l.into_iter().map(Some).collect(), 2).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_row_shifts(x in matrix(1..=6, 1..=6), shift in prop::collection::vec(-50.0f64..50.0, 6)) {
        let s = ops::softmax_rows(&x).unwrap();
        for r in s.row_sums() {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
        let shifted = DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) + shift[i]);
        prop_assert!(ops::softmax_rows(&shifted).unwrap().max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn column_normalization_is_idempotent(x in matrix(1..=6, 1..=6)) {
        prop_assume!(x.column_norms().iter().all(|&n| n > 1e-6));
        let (once, _) = ops::column_l2_normalize(&x);
        let (twice, _) = ops::column_l2_normalize(&once);
        prop_assert!(twice.max_abs_diff(&once) < 1e-14);
    }

    #[test]
    fn normalized_operators_are_symmetric_and_psd(g in graph(16), loops in any::<bool>()) {
        let a = normalized_adjacency(&g, loops);
        prop_assert!(a.is_symmetric(0.0));
        let l = normalized_laplacian(&g);
        prop_assert!(l.is_symmetric(0.0));
        let eig = dense_eigh_oracle(&l.to_dense()).unwrap();
        prop_assert!(*eig.values.last().unwrap() >= -1e-10);
    }

    #[test]
    fn dataset_round_trip(g in graph(12)) {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &g).unwrap();
        let back = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
        prop_assert_eq!(back.features.as_slice(), g.features.as_slice());
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.labels(), g.labels());
    }

    #[test]
    fn subspace_iteration_matches_dense_oracle(g in graph(16), k in 1usize..4, seed in any::<u64>()) {
        let n = g.node_count();
        prop_assume!(k < n);
        let a = normalized_adjacency(&g, true);
        let eig = dense_eigh_oracle(&a.to_dense()).unwrap();
        // the top-k subspace is only well defined across a spectral gap
        prop_assume!(eig.values[k - 1] - eig.values[k] > 1e-3);
        let opts = SubspaceOptions { tol: 1e-12, max_iter: 20_000, ..Default::default() };
        let basis = subspace_iteration(&a, k, &opts, &mut RngState::new(seed)).unwrap();
        prop_assert!(orthonormality_error(&basis.q) < 1e-8);
        for i in 0..k {
            prop_assert!((basis.ritz_values[i] - eig.values[i]).abs() < 1e-6);
        }
        let top = DenseMatrix::from_fn(n, k, |r, c| eig.vectors.get(r, c));
        prop_assert!(projector_distance(&basis.q, &top) < 1e-5);
    }

    #[test]
    fn ratiocut_trace_equals_edge_sum(g in graph(12), raw in prop::collection::vec(0usize..3, 12)) {
        let n = g.node_count();
        prop_assume!(g.degrees().iter().all(|&d| d > 0));
        let assignments: Vec<usize> = raw[..n].to_vec();
        let ind = ClusterIndicator::from_assignments(assignments, 3).unwrap();
        let l = normalized_laplacian(&g);
        let got = ratiocut_trace(&ind.c, &l).unwrap();
        let deg: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
        let mut expect = 0.0;
        for (i, j) in g.edges() {
            for c in 0..3 {
                let hi = ind.c.get(i, c) / deg[i].sqrt();
                let hj = ind.c.get(j, c) / deg[j].sqrt();
                expect += (hi - hj).powi(2);
            }
        }
        prop_assert!((got - expect).abs() < 1e-10, "{} vs {}", got, expect);
    }

    #[test]
    fn lloyd_wcss_never_increases(x in matrix(4..=12, 1..=3), k in 1usize..4, seed in any::<u64>()) {
        let c = kmeans_pp_seed(&x, k, &mut RngState::new(seed));
        let r = lloyd(&x, c, 300).unwrap();
        for w in r.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn assignments_are_distributions_and_kl_is_non_negative(h in matrix(2..=8, 1..=4), seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let c = DenseMatrix::from_fn(3, h.cols(), |_, _| rng.uniform_in(-2.0, 2.0));
        let q = soft_assign(&h, &c).unwrap();
        let p = target_distribution(&q).unwrap();
        for (a, b) in q.row_sums().into_iter().zip(p.row_sums()) {
            prop_assert!((a - 1.0).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
        }
        let scope: Vec<usize> = (0..h.rows()).collect();
        let mut t = Tape::new();
        let qv = t.constant(q.clone());
        let kl = kl_loss(&mut t, &p, qv, &scope).unwrap();
        prop_assert!(t.value(kl).item() >= -1e-12);
        let mut t = Tape::new();
        let qv = t.constant(q.clone());
        let same = kl_loss(&mut t, &q, qv, &scope).unwrap();
        prop_assert!(t.value(same).item().abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_ignores_per_row_scaling_of_the_kernel(x in matrix(2..=10, 2..=4), logs in prop::collection::vec(-3.0f64..3.0, 10)) {
        let probs = ops::softmax_rows(&x).unwrap();
        let eps = 0.5;
        // scaling row i of exp(Ψ′/ε) by e^{s} is adding ε·s to row i of Ψ′
        let shifted = DenseMatrix::from_fn(probs.rows(), probs.cols(), |i, j| probs.get(i, j) + eps * logs[i]);
        let a = sinkhorn_plan(&probs, eps, 200).unwrap();
        let b = sinkhorn_plan(&shifted, eps, 200).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-8);
    }
}

#[test]
fn inverted_dropout_preserves_expectation() {
    let mut rng = RngState::new(42);
    for p in [0.3, 0.5, 0.8] {
        let mask = ops::dropout_mask(1, 100_000, p, &mut rng).unwrap();
        let mean = mask.sum() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.02, "p={p}: {mean}");
    }
}
