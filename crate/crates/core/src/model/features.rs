use crate::graph::CsrMatrix;
use crate::numerics::DenseMatrix;

/// Node features, plus a CSR copy when the matrix is mostly zeros. The
/// sparse copy carries the input transform's first product, which dominates
/// the cost of a forward pass on bag-of-words features.
#[derive(Clone, Debug)]
pub struct NodeFeatures {
    dense: DenseMatrix,
    sparse: Option<CsrMatrix>,
}

impl NodeFeatures {
    /// Fraction of nonzeros at or below which the CSR copy is kept.
    pub const SPARSE_DENSITY: f64 = 0.1;

    pub fn new(dense: DenseMatrix) -> Self {
        let nnz = dense.as_slice().iter().filter(|v| **v != 0.0).count();
        let sparse = (!dense.is_empty() && (nnz as f64) <= Self::SPARSE_DENSITY * dense.len() as f64)
            .then(|| CsrMatrix::from_dense(&dense));
        Self { dense, sparse }
    }

    pub fn dense(&self) -> &DenseMatrix {
        &self.dense
    }

    pub fn sparse(&self) -> Option<&CsrMatrix> {
        self.sparse.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.dense.rows()
    }

    pub fn cols(&self) -> usize {
        self.dense.cols()
    }
}

impl From<DenseMatrix> for NodeFeatures {
    fn from(dense: DenseMatrix) -> Self {
        Self::new(dense)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_copy_only_below_threshold() {
        let mostly_zero = DenseMatrix::from_fn(10, 10, |i, j| f64::from(i == j && i < 5));
        let f = NodeFeatures::new(mostly_zero.clone());
        assert_eq!(f.sparse().unwrap().to_dense(), mostly_zero);
        assert!(NodeFeatures::new(DenseMatrix::filled(3, 3, 1.0)).sparse().is_none());
        assert!(NodeFeatures::new(DenseMatrix::zeros(0, 4)).sparse().is_none());
    }
}
