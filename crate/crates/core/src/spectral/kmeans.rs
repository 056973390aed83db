use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{is_deterministic, DenseMatrix, RngState};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_LLOYD_ITERS: usize = 300;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: DenseMatrix,
    pub wcss: f64,
    /// WCSS after each assignment step.
    pub history: Vec<f64>,
}

/// Cluster assignments plus the normalized indicator with
/// `C[i, k] = 1/√|cluster k|` for `i` in cluster `k`. Empty clusters get a
/// zero column, so `CᵀC = I` only when every cluster is populated.
#[derive(Clone, Debug)]
pub struct ClusterIndicator {
    pub assignments: Vec<usize>,
    pub c: DenseMatrix,
}

impl ClusterIndicator {
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            if a >= k {
                return Err(Error::Parameter(format!("assignment {a} outside 0..{k}")));
            }
            sizes[a] += 1;
        }
        let mut c = DenseMatrix::zeros(assignments.len(), k);
        for (i, &a) in assignments.iter().enumerate() {
            c.set(i, a, 1.0 / (sizes[a] as f64).sqrt());
        }
        Ok(Self { assignments, c })
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.c.cols()];
        self.assignments.iter().for_each(|&a| sizes[a] += 1);
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per row, ties to the lowest index, plus the total cost.
fn assign(points: &DenseMatrix, centroids: &DenseMatrix, out: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (i, slot) in out.iter_mut().enumerate() {
        let p = points.row(i);
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for c in 0..centroids.rows() {
            let d = sq_dist(p, centroids.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *slot = best;
        total += best_d;
    }
    total
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance to the nearest chosen centre.
pub fn kmeans_pp_seed(points: &DenseMatrix, k: usize, rng: &mut RngState) -> DenseMatrix {
    let n = points.rows();
    let mut centroids = DenseMatrix::zeros(k, points.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

/// Lloyd iterations from given centroids until assignments stop changing or
/// `max_iter` is reached. An empty cluster is moved onto the point farthest
/// from its current centroid, provided that distance is positive.
pub fn lloyd(points: &DenseMatrix, mut centroids: DenseMatrix, max_iter: usize) -> Result<KMeansResult> {
    let (n, d) = points.shape();
    if centroids.cols() != d {
        return Err(Error::dim("lloyd", format!("centroids have {} columns, points {d}", centroids.cols())));
    }
    let k = centroids.rows();
    let mut assignments = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let cost = assign(points, &centroids, &mut next);
        history.push(cost);
        if next == assignments {
            break;
        }
        assignments.clone_from(&next);

        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            sums.row_mut(a).iter_mut().zip(points.row(i)).for_each(|(s, p)| *s += p);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids.row_mut(c).iter_mut().zip(sums.row(c)).for_each(|(x, s)| *x = s * inv);
            }
        }
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let (far, far_d) = (0..n)
                .map(|i| (i, sq_dist(points.row(i), centroids.row(assignments[i]))))
                .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if far_d > 0.0 {
                centroids.row_mut(c).copy_from_slice(points.row(far));
            }
        }
    }
    let wcss = *history.last().expect("at least one pass");
    Ok(KMeansResult { assignments: next, centroids, wcss, history })
}

/// Best of `restarts` seeded Lloyd runs by WCSS, ties to the lowest restart.
/// Restart `r` draws from its own stream, so the result does not depend on
/// whether restarts run in parallel.
pub fn kmeans(
    points: &DenseMatrix,
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &mut RngState,
) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k-means needs 1 <= k <= n, got k={k}, n={n}")));
    }
    if restarts == 0 {
        return Err(Error::Parameter("k-means needs at least one restart".into()));
    }
    if !points.is_finite() {
        return Err(Error::Numeric("k-means input contains non-finite values".into()));
    }
    let base = rng.next_u64();
    let run = |r: usize| {
        let mut stream = RngState::with_stream(base, r as u64);
        lloyd(points, kmeans_pp_seed(points, k, &mut stream), max_iter)
    };
    let runs: Vec<Result<KMeansResult>> = if is_deterministic() {
        (0..restarts).map(run).collect()
    } else {
        (0..restarts).into_par_iter().map(run).collect()
    };
    let mut best: Option<KMeansResult> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.wcss < b.wcss) {
            best = Some(r);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Round a spectral embedding to a hard clustering.
pub fn kmeans_round(q: &DenseMatrix, k: usize, rng: &mut RngState, restarts: usize) -> Result<ClusterIndicator> {
    let result = kmeans(q, k, restarts, DEFAULT_LLOYD_ITERS, rng)?;
    ClusterIndicator::from_assignments(result.assignments, k)
}
