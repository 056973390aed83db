use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const RANK_TOL: f64 = 1e-12;

/// Orthonormal basis for the column span of `m` by modified Gram–Schmidt
/// with one reorthogonalization pass. Column signs follow the input.
pub fn qr_orthonormalize(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, k) = m.shape();
    if n < k {
        return Err(Error::dim("qr_orthonormalize", format!("{n} rows < {k} columns")));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = m.column(j);
        let original = norm(&v);
        for _pass in 0..2 {
            for q in &basis {
                let r = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qv)| *x -= r * qv);
            }
        }
        let len = norm(&v);
        if len < RANK_TOL * original.max(1.0) {
            return Err(Error::Rank { column: j, norm: len });
        }
        v.iter_mut().for_each(|x| *x /= len);
        basis.push(v);
    }
    Ok(DenseMatrix::from_fn(n, k, |i, j| basis[j][i]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_error(q: &DenseMatrix) -> f64 {
    let g = q.t_matmul(q).expect("square gram");
    g.sub(&DenseMatrix::identity(q.cols())).expect("same shape").frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_input_is_unchanged() {
        let s = 0.5_f64.sqrt();
        let q = DenseMatrix::from_rows(&[[s, s], [s, -s], [0.0, 0.0]]);
        assert!(qr_orthonormalize(&q).unwrap().max_abs_diff(&q) < 1e-15);
    }

    #[test]
    fn hand_computed_gram_schmidt() {
        // columns (1,0,0) and (1,1,0): second loses its e1 component
        let m = DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]);
        let q = qr_orthonormalize(&m).unwrap();
        assert_eq!(q, DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]));
        assert!(orthonormality_error(&q) < 1e-12);
    }

    #[test]
    fn duplicated_column_is_rank_error() {
        let m = DenseMatrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        assert!(matches!(qr_orthonormalize(&m), Err(Error::Rank { column: 1, .. })));
    }

    #[test]
    fn wide_input_rejected() {
        assert!(qr_orthonormalize(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
