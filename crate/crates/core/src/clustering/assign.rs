use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, ParamId, ParamStore, Parameter, RngState, Tape, Var};
use crate::spectral::{kmeans_pp_seed, lloyd};

pub const CENTROID_LLOYD_ITERS: usize = 20;
const PAD_NOISE: f64 = 1e-3;

/// Trainable cluster centroids, created lazily from the first embedding the
/// clustering losses see.
#[derive(Clone, Debug)]
pub struct ClusterState {
    k: usize,
    centroids: Option<ParamId>,
}

impl ClusterState {
    pub fn new(k: usize) -> Self {
        Self { k, centroids: None }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_initialized(&self) -> bool {
        self.centroids.is_some()
    }

    pub fn centroids(&self) -> Result<ParamId> {
        self.centroids.ok_or_else(|| Error::Contract("cluster centroids used before initialization".into()))
    }

    /// Seed centroids from `h` and register them in `store` as a
    /// parameter excluded from weight decay.
    pub fn initialize(&mut self, store: &mut ParamStore, h: &DenseMatrix, rng: &mut RngState) -> Result<ParamId> {
        if self.centroids.is_some() {
            return Err(Error::Contract("cluster centroids already initialized".into()));
        }
        let c = init_centroids(h, self.k, rng)?;
        let id = store.add(Parameter::new("centroids", c).without_decay());
        self.centroids = Some(id);
        Ok(id)
    }
}

/// k-means++ seeding plus a short Lloyd refinement. When `h` has fewer
/// distinct rows than `k`, the missing centroids are noisy copies of existing
/// rows so that all `k` stay distinct.
pub fn init_centroids(h: &DenseMatrix, k: usize, rng: &mut RngState) -> Result<DenseMatrix> {
    let n = h.rows();
    if k == 0 || n < k {
        return Err(Error::Parameter(format!("init_centroids needs 1 <= k <= rows, got k={k}, rows={n}")));
    }
    if !h.is_finite() {
        return Err(Error::Numeric("init_centroids: embedding contains non-finite values".into()));
    }
    let mut distinct: Vec<&[f64]> = (0..n).map(|i| h.row(i)).collect();
    distinct.sort_by(|a, b| {
        a.iter().zip(*b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();

    let seeds = if distinct.len() >= k {
        kmeans_pp_seed(h, k, rng)
    } else {
        let m = distinct.len();
        DenseMatrix::from_fn(k, h.cols(), |c, j| {
            let base = distinct[c % m][j];
            if c < m {
                base
            } else {
                base + PAD_NOISE * rng.normal()
            }
        })
    };
    Ok(lloyd(h, seeds, CENTROID_LLOYD_ITERS)?.centroids)
}

/// Student's-t soft assignment on the tape:
/// `Q[i, k] ∝ 1 / (1 + ‖h_i − c_k‖²)`.
pub fn soft_assign_on_tape(tape: &mut Tape<'_>, h: Var, centroids: Var) -> Result<Var> {
    let d2 = tape.squared_distances(h, centroids)?;
    let kernel = tape.student_kernel(d2);
    tape.normalize_rows(kernel)
}

pub fn soft_assign(h: &DenseMatrix, centroids: &DenseMatrix) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let (hv, cv) = (tape.constant(h.clone()), tape.constant(centroids.clone()));
    let q = soft_assign_on_tape(&mut tape, hv, cv)?;
    Ok(tape.value(q).clone())
}

/// Sharpened target `P[i, k] ∝ Q[i, k]² / f_k` with cluster frequency
/// `f_k = Σ_j Q[j, k]` over all rows. Plain values, never on a tape.
pub fn target_distribution(q: &DenseMatrix) -> Result<DenseMatrix> {
    let freq = q.col_sums();
    if let Some(k) = freq.iter().position(|&f| !(f > 0.0)) {
        return Err(Error::Numeric(format!("target_distribution: cluster {k} has zero total assignment")));
    }
    let mut p = DenseMatrix::from_fn(q.rows(), q.cols(), |i, k| q.get(i, k) * q.get(i, k) / freq[k]);
    for i in 0..p.rows() {
        let s: f64 = p.row(i).iter().sum();
        if !(s > 0.0) {
            return Err(Error::Numeric(format!("target_distribution: row {i} vanished")));
        }
        p.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    Ok(p)
}

fn check_scope(scope: &[usize], n: usize, what: &'static str) -> Result<()> {
    if scope.is_empty() {
        return Err(Error::Contract(format!("{what}: empty node scope")));
    }
    if let Some(&bad) = scope.iter().find(|&&i| i >= n) {
        return Err(Error::dim(what, format!("node {bad} out of range for {n} rows")));
    }
    Ok(())
}

/// `(1/|S|) Σ_{i∈S} Σ_k P log(P/Q)` with `P` constant. Returns a scalar node.
pub fn kl_loss(tape: &mut Tape<'_>, p: &DenseMatrix, q: Var, scope: &[usize]) -> Result<Var> {
    let n = tape.value(q).rows();
    if p.shape() != tape.value(q).shape() {
        return Err(Error::dim("kl_loss", format!("P {:?} vs Q {:?}", p.shape(), tape.value(q).shape())));
    }
    check_scope(scope, n, "kl_loss")?;
    let p_scope = p.select_rows(scope);
    let entropy_term: f64 = p_scope.as_slice().iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum();
    let q_scope = tape.gather_rows(q, scope)?;
    let log_q = tape.log(q_scope)?;
    let target = tape.constant(p_scope);
    let cross = tape.hadamard(target, log_q)?;
    let cross = tape.sum(cross);
    let neg_cross = tape.scale(cross, -1.0);
    let constant = tape.constant(DenseMatrix::scalar(entropy_term));
    let total = tape.add(neg_cross, constant)?;
    Ok(tape.scale(total, 1.0 / scope.len() as f64))
}
