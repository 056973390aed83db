//! Value-level nonlinearities. The tape wraps each of these with a backward
//! rule; they are also used directly wherever no gradient is needed.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RngState};

/// Columns with norm at or below this are left untouched by normalization.
pub const ZERO_COLUMN_GUARD: f64 = 1e-12;

fn require_finite(x: &DenseMatrix, op: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{op}: non-finite input")))
    }
}

pub fn relu(x: &DenseMatrix) -> DenseMatrix {
    x.map(|v| v.max(0.0))
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows(x: &DenseMatrix) -> Result<DenseMatrix> {
    require_finite(x, "softmax_rows")?;
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// Row-wise `log(softmax(x))` computed without forming the probabilities.
pub fn log_softmax_rows(x: &DenseMatrix) -> Result<DenseMatrix> {
    require_finite(x, "log_softmax_rows")?;
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let lse = log_sum_exp(row);
        row.iter_mut().for_each(|v| *v -= lse);
    }
    Ok(out)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_elementwise(x: &DenseMatrix) -> Result<DenseMatrix> {
    require_finite(x, "log")?;
    if x.as_slice().iter().any(|&v| v <= 0.0) {
        return Err(Error::Numeric("log: non-positive entry".into()));
    }
    Ok(x.map(f64::ln))
}

/// Inverted-dropout multiplier mask: each entry is `0` with probability `p`
/// and `1/(1-p)` otherwise.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut RngState) -> Result<DenseMatrix> {
    check_dropout_rate(p)?;
    let keep = 1.0 / (1.0 - p);
    Ok(DenseMatrix::from_fn(rows, cols, |_, _| if rng.uniform() < p { 0.0 } else { keep }))
}

pub fn check_dropout_rate(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("dropout rate {p} outside [0, 1)")))
    }
}

/// Divide each column by its Euclidean norm; near-zero columns pass through.
/// Returns the normalized matrix and the per-column divisors (1 for guarded
/// columns).
pub fn column_l2_normalize(x: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let divisors: Vec<f64> =
        x.column_norms().into_iter().map(|n| if n > ZERO_COLUMN_GUARD { n } else { 1.0 }).collect();
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, d) in out.row_mut(i).iter_mut().zip(&divisors) {
            *v /= d;
        }
    }
    (out, divisors)
}

/// `‖x − y‖²_F`.
pub fn frobenius_sq_diff(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    Ok(x.sub(y)?.frobenius_sq())
}
