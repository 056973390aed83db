use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{is_deterministic, DenseMatrix};

/// Immutable sparse matrix in compressed-sparse-row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Validating constructor: offsets non-decreasing and ending at nnz,
    /// column indices strictly increasing within a row and `< cols`.
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::Contract(format!("csr: {msg}")));
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return bad(format!("row_offsets has length {}", row_offsets.len()));
        }
        if row_offsets[rows] != col_indices.len() || col_indices.len() != values.len() {
            return bad("offset/index/value lengths disagree".into());
        }
        for i in 0..rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return bad(format!("row_offsets decrease at row {i}"));
            }
            let cols_i = &col_indices[lo..hi];
            if cols_i.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {i} columns not strictly increasing"));
            }
            if cols_i.last().is_some_and(|&c| c >= cols) {
                return bad(format!("row {i} has column index out of range"));
            }
        }
        Ok(Self { rows, cols, row_offsets, col_indices, values })
    }

    /// Build from `(row, col, value)` entries; duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::dim("from_triplets", format!("entry ({r}, {c}) outside {rows}x{cols}")));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_offsets = vec![0; rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::new(rows, cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, row_offsets: (0..=n).collect(), col_indices: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_offsets: vec![0; rows + 1], col_indices: Vec::new(), values: Vec::new() }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), entries).expect("in-range entries")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            entries.extend(cols.iter().zip(vals).map(|(&j, &v)| (j, i, v)));
        }
        Self::from_triplets(self.cols, self.rows, entries).expect("transpose of valid matrix")
    }

    /// Whether every stored `(i, j)` has a matching `(j, i)` within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        (0..self.rows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| {
                let (cj, _) = self.row(j);
                cj.binary_search(&i).is_ok() && (self.get(j, i) - v).abs() <= tol
            })
        })
    }

    /// `self · b`.
    pub fn matmul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.rows() {
            return Err(Error::dim(
                "sparse_dense_matmul",
                format!("{}x{} times {:?}", self.rows, self.cols, b.shape()),
            ));
        }
        let n = b.cols();
        let mut out = DenseMatrix::zeros(self.rows, n);
        if n == 0 {
            return Ok(out);
        }
        let fill_row = |i: usize, orow: &mut [f64]| {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, x) in orow.iter_mut().zip(b.row(j)) {
                    *o += v * x;
                }
            }
        };
        if is_deterministic() {
            for (i, orow) in out.as_mut_slice().chunks_mut(n).enumerate() {
                fill_row(i, orow);
            }
        } else {
            out.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(i, orow)| fill_row(i, orow));
        }
        Ok(out)
    }

    /// `selfᵀ · b` by scattering rows; no transpose is materialized.
    pub fn transpose_matmul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != b.rows() {
            return Err(Error::dim(
                "sparse_transpose_matmul",
                format!("({}x{})ᵀ times {:?}", self.rows, self.cols, b.shape()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, b.cols());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let brow = b.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, x) in out.row_mut(j).iter_mut().zip(brow) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_are_checked() {
        assert!(CsrMatrix::new(2, 2, vec![0, 1, 2], vec![1, 0], vec![1.0, 2.0]).is_ok());
        assert!(CsrMatrix::new(2, 2, vec![0, 2, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(CsrMatrix::new(2, 2, vec![0, 1, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::new(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn triplets_merge_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn identity_and_empty_products() {
        let b = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(CsrMatrix::identity(4).matmul_dense(&b).unwrap(), b);
        assert_eq!(CsrMatrix::zeros(2, 4).matmul_dense(&b).unwrap(), DenseMatrix::zeros(2, 3));
        assert!(CsrMatrix::zeros(2, 3).matmul_dense(&b).is_err());
    }

    #[test]
    fn transpose_product_matches_dense() {
        let s = CsrMatrix::from_triplets(3, 4, vec![(0, 3, 2.0), (2, 0, -1.0), (1, 1, 0.5)]).unwrap();
        let b = DenseMatrix::from_fn(3, 2, |i, j| i as f64 + 2.0 * j as f64);
        let expect = s.to_dense().t_matmul(&b).unwrap();
        assert_eq!(s.transpose_matmul_dense(&b).unwrap(), expect);
        assert_eq!(s.transpose().to_dense(), s.to_dense().transpose());
    }
}
