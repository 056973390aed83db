//! Full symmetric eigendecomposition by cyclic Jacobi rotations. Small and
//! slow; used as an independent reference for the iterative solvers.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const ORACLE_MAX_DIM: usize = 64;

#[derive(Clone, Debug)]
pub struct DenseEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: DenseMatrix,
}

pub fn dense_eigh_oracle(m: &DenseMatrix) -> Result<DenseEigen> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Contract(format!("eigh needs a square matrix, got {:?}", m.shape())));
    }
    if n > ORACLE_MAX_DIM {
        return Err(Error::Contract(format!("eigh oracle limited to n <= {ORACLE_MAX_DIM}")));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 {
                return Err(Error::Contract(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a.get(y, y).total_cmp(&a.get(x, x)));
    Ok(DenseEigen {
        values: order.iter().map(|&i| a.get(i, i)).collect(),
        vectors: DenseMatrix::from_fn(n, n, |r, c| v.get(r, order[c])),
    })
}
