use super::hyper::HyperParams;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Tape, Var};

/// Per-epoch loss values before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub class: f64,
    pub kl: f64,
    pub pl: f64,
}

/// `L_class + λ_kl·L_KL + λ_pl·L_PL`, with both clustering weights zero
/// during warmup.
pub fn total_loss(components: LossComponents, hp: &HyperParams, epoch: usize) -> f64 {
    let (w_kl, w_pl) = hp.clustering_weights(epoch);
    let mut total = components.class;
    if w_kl != 0.0 {
        total += w_kl * components.kl;
    }
    if w_pl != 0.0 {
        total += w_pl * components.pl;
    }
    total
}

fn one_hot_targets(labels: &[Option<usize>], idx: &[usize], k: usize) -> Result<DenseMatrix> {
    let mut t = DenseMatrix::zeros(idx.len(), k);
    for (row, &i) in idx.iter().enumerate() {
        match labels.get(i).copied().flatten() {
            Some(y) if y < k => t.set(row, y, 1.0),
            Some(y) => return Err(Error::Contract(format!("label {y} of node {i} outside 0..{k}"))),
            None => return Err(Error::Contract(format!("node {i} has no label"))),
        }
    }
    Ok(t)
}

/// Mean negative log-likelihood of the true class over `idx`, on the tape.
pub fn class_loss_on_tape(tape: &mut Tape<'_>, log_probs: Var, labels: &[Option<usize>], idx: &[usize]) -> Result<Var> {
    if idx.is_empty() {
        return Err(Error::Contract("class loss over an empty node set".into()));
    }
    let k = tape.value(log_probs).cols();
    let targets = tape.constant(one_hot_targets(labels, idx, k)?);
    let picked = tape.gather_rows(log_probs, idx)?;
    let prod = tape.hadamard(targets, picked)?;
    let total = tape.sum(prod);
    Ok(tape.scale(total, -1.0 / idx.len() as f64))
}

/// `−(1/|idx|) Σ log Y′[i, y_i]` on plain values.
pub fn class_loss(y_prime: &DenseMatrix, labels: &[Option<usize>], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::Contract("class loss over an empty node set".into()));
    }
    let targets = one_hot_targets(labels, idx, y_prime.cols())?;
    let mut total = 0.0;
    for (row, &i) in idx.iter().enumerate() {
        for k in 0..y_prime.cols() {
            if targets.get(row, k) != 0.0 {
                total -= y_prime.get(i, k).ln();
            }
        }
    }
    Ok(total / idx.len() as f64)
}

/// Share of `idx` whose row argmax (lowest index on ties) equals the label.
pub fn accuracy(y_prime: &DenseMatrix, labels: &[Option<usize>], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(f64::NAN);
    }
    let pred = y_prime.argmax_rows();
    let mut hits = 0usize;
    for &i in idx {
        let y = labels.get(i).copied().flatten().ok_or_else(|| Error::Contract(format!("node {i} has no label")))?;
        hits += usize::from(pred[i] == y);
    }
    Ok(hits as f64 / idx.len() as f64)
}
