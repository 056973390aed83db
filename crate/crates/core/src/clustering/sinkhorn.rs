use crate::error::{Error, Result};
use crate::numerics::ops::log_sum_exp;
use crate::numerics::{DenseMatrix, Tape, Var};

/// Balanced soft pseudo-labels for the unlabeled nodes. Rows sum to 1.
#[derive(Clone, Debug)]
pub struct PseudoLabels {
    pub psi: DenseMatrix,
    pub iterations: usize,
}

fn check_inputs(psi_prime: &DenseMatrix, epsilon: f64, iterations: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("sinkhorn epsilon must be > 0, got {epsilon}")));
    }
    if iterations == 0 {
        return Err(Error::Parameter("sinkhorn needs at least one iteration".into()));
    }
    if psi_prime.rows() == 0 || psi_prime.cols() == 0 {
        return Err(Error::Parameter(format!("sinkhorn input is empty ({:?})", psi_prime.shape())));
    }
    if !psi_prime.is_finite() {
        return Err(Error::Numeric("sinkhorn input contains non-finite values".into()));
    }
    Ok(())
}

/// Entropic transport plan between uniform row marginals `1/n` and uniform
/// column marginals `1/K`, starting from `exp(Ψ′/ε)`. Each of the
/// `iterations` steps rescales rows, then columns. Computed in log space so
/// that small `ε` cannot overflow.
pub fn sinkhorn_plan(psi_prime: &DenseMatrix, epsilon: f64, iterations: usize) -> Result<DenseMatrix> {
    check_inputs(psi_prime, epsilon, iterations)?;
    let (n, k) = psi_prime.shape();
    let (log_a, log_b) = (-(n as f64).ln(), -(k as f64).ln());
    let mut log_psi = psi_prime.scale(1.0 / epsilon);
    let mut column = vec![0.0; n];
    for _ in 0..iterations {
        for i in 0..n {
            let row = log_psi.row_mut(i);
            let shift = log_a - log_sum_exp(row);
            row.iter_mut().for_each(|v| *v += shift);
        }
        for j in 0..k {
            for (i, slot) in column.iter_mut().enumerate() {
                *slot = log_psi.get(i, j);
            }
            let shift = log_b - log_sum_exp(&column);
            for i in 0..n {
                log_psi.set(i, j, log_psi.get(i, j) + shift);
            }
        }
    }
    let plan = log_psi.map(f64::exp);
    if !plan.is_finite() {
        return Err(Error::Numeric("sinkhorn plan is not finite".into()));
    }
    Ok(plan)
}

/// Same recurrence with explicit exponentials and divisions. Overflows for
/// small `ε`; kept to cross-check the log-space version.
pub fn sinkhorn_plan_direct(psi_prime: &DenseMatrix, epsilon: f64, iterations: usize) -> Result<DenseMatrix> {
    check_inputs(psi_prime, epsilon, iterations)?;
    let (n, k) = psi_prime.shape();
    let (a, b) = (1.0 / n as f64, 1.0 / k as f64);
    let mut psi = psi_prime.map(|v| (v / epsilon).exp());
    if !psi.is_finite() || psi.as_slice().contains(&0.0) {
        return Err(Error::Numeric(format!("exp(psi/{epsilon}) leaves the f64 range")));
    }
    for _ in 0..iterations {
        for (i, s) in psi.row_sums().into_iter().enumerate() {
            psi.row_mut(i).iter_mut().for_each(|v| *v *= a / s);
        }
        let cols = psi.col_sums();
        for i in 0..n {
            psi.row_mut(i).iter_mut().zip(&cols).for_each(|(v, s)| *v *= b / s);
        }
    }
    if !psi.is_finite() {
        return Err(Error::Numeric("sinkhorn plan is not finite".into()));
    }
    Ok(psi)
}

/// Normalize every row of a transport plan to a distribution. At an exact
/// row-marginal fixed point this is multiplication by `n`.
fn rows_to_distributions(mut plan: DenseMatrix) -> Result<DenseMatrix> {
    for i in 0..plan.rows() {
        let s: f64 = plan.row(i).iter().sum();
        if !(s > 0.0) {
            return Err(Error::Numeric(format!("sinkhorn row {i} has zero mass")));
        }
        plan.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    Ok(plan)
}

pub fn sinkhorn_pseudo_labels(psi_prime: &DenseMatrix, epsilon: f64, iterations: usize) -> Result<PseudoLabels> {
    let plan = sinkhorn_plan(psi_prime, epsilon, iterations)?;
    Ok(PseudoLabels { psi: rows_to_distributions(plan)?, iterations })
}

/// Cross-entropy `−(1/n_u) Σ_i Σ_k Ψ[i, k] log Ψ′[i, k]` against fixed
/// targets. `log_predictions` holds `log Ψ′` on the tape.
pub fn pseudo_label_loss(tape: &mut Tape<'_>, targets: &DenseMatrix, log_predictions: Var) -> Result<Var> {
    let shape = tape.value(log_predictions).shape();
    if targets.shape() != shape {
        return Err(Error::dim("pseudo_label_loss", format!("targets {:?} vs predictions {shape:?}", targets.shape())));
    }
    if shape.0 == 0 {
        return Err(Error::Contract("pseudo_label_loss: no unlabeled nodes".into()));
    }
    let t = tape.constant(targets.clone());
    let prod = tape.hadamard(t, log_predictions)?;
    let total = tape.sum(prod);
    Ok(tape.scale(total, -1.0 / shape.0 as f64))
}
