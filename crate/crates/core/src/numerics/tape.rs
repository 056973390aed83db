//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records every operation in execution order, so node ids are
//! already a topological order. [`Tape::backward`] sweeps the tape once from
//! the loss toward the leaves and accumulates into the [`ParamStore`].
//! Adjoints of intermediate nodes are dropped as soon as they are consumed.

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::numerics::{ops, DenseMatrix, ParamId, ParamStore, RngState};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<'g> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    SparseMatMul(&'g CsrMatrix, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    AddRowVector(Var, Var),
    Hadamard(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Log(Var),
    Dropout { input: Var, mask: DenseMatrix },
    ColumnL2Normalize { input: Var, divisors: Vec<f64> },
    FrobeniusSqDiff(Var, Var),
    Sum(Var),
    GatherRows { input: Var, rows: Vec<usize> },
    SquaredDistances(Var, Var),
    StudentKernel(Var),
    NormalizeRows { input: Var, sums: Vec<f64> },
}

impl Op<'_> {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Constant | Param(_) => vec![],
            MatMul(a, b)
            | Add(a, b)
            | Sub(a, b)
            | AddRowVector(a, b)
            | Hadamard(a, b)
            | FrobeniusSqDiff(a, b)
            | SquaredDistances(a, b) => vec![*a, *b],
            Transpose(a)
            | SparseMatMul(_, a)
            | Scale(a, _)
            | Relu(a)
            | SoftmaxRows(a)
            | LogSoftmaxRows(a)
            | Log(a)
            | Sum(a)
            | StudentKernel(a) => vec![*a],
            Dropout { input, .. }
            | ColumnL2Normalize { input, .. }
            | GatherRows { input, .. }
            | NormalizeRows { input, .. } => vec![*input],
        }
    }
}

#[derive(Debug)]
struct Node<'g> {
    value: DenseMatrix,
    op: Op<'g>,
    requires_grad: bool,
}

/// Recorded computation graph. The lifetime ties sparse operands (which are
/// borrowed, never copied) to the tape.
#[derive(Debug, Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

fn shape_err(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Error {
    Error::dim(op, format!("{:?} vs {:?}", a.shape(), b.shape()))
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: DenseMatrix, op: Op<'g>) -> Var {
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            other => other.inputs().iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient. Also the way to detach a value:
    /// `tape.constant(tape.value(v).clone())`.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    /// `s · b` for a constant sparse left operand.
    pub fn sparse_matmul(&mut self, s: &'g CsrMatrix, b: Var) -> Result<Var> {
        let value = s.matmul_dense(self.value(b))?;
        Ok(self.push(value, Op::SparseMatMul(s, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c))
    }

    /// Adds the `1×c` row vector `bias` to every row of `a`.
    pub fn add_row_vector(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row_vector", x, b));
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (v, bv) in value.row_mut(i).iter_mut().zip(b.as_slice()) {
                *v += bv;
            }
        }
        Ok(self.push(value, Op::AddRowVector(a, bias)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = ops::relu(self.value(a));
        self.push(value, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let value = ops::softmax_rows(self.value(a))?;
        Ok(self.push(value, Op::SoftmaxRows(a)))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let value = ops::log_softmax_rows(self.value(a))?;
        Ok(self.push(value, Op::LogSoftmaxRows(a)))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let value = ops::log_elementwise(self.value(a))?;
        Ok(self.push(value, Op::Log(a)))
    }

    /// Inverted dropout in training mode; identity (no node recorded) otherwise.
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut RngState, training: bool) -> Result<Var> {
        ops::check_dropout_rate(p)?;
        if !training || p == 0.0 {
            return Ok(a);
        }
        let (r, c) = self.value(a).shape();
        let mask = ops::dropout_mask(r, c, p, rng)?;
        let value = self.value(a).hadamard(&mask)?;
        Ok(self.push(value, Op::Dropout { input: a, mask }))
    }

    pub fn column_l2_normalize(&mut self, a: Var) -> Var {
        let (value, divisors) = ops::column_l2_normalize(self.value(a));
        self.push(value, Op::ColumnL2Normalize { input: a, divisors })
    }

    /// Scalar `‖a − b‖²_F`.
    pub fn frobenius_sq_diff(&mut self, a: Var, b: Var) -> Result<Var> {
        let s = ops::frobenius_sq_diff(self.value(a), self.value(b))?;
        Ok(self.push(DenseMatrix::scalar(s), Op::FrobeniusSqDiff(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(DenseMatrix::scalar(s), Op::Sum(a))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::dim("gather_rows", format!("row {bad} out of range for {} rows", x.rows())));
        }
        let value = x.select_rows(rows);
        Ok(self.push(value, Op::GatherRows { input: a, rows: rows.to_vec() }))
    }

    /// Pairwise squared Euclidean distances between the rows of `h` (n×d)
    /// and the rows of `c` (k×d), giving n×k.
    pub fn squared_distances(&mut self, h: Var, c: Var) -> Result<Var> {
        let (hv, cv) = (self.value(h), self.value(c));
        if hv.cols() != cv.cols() {
            return Err(shape_err("squared_distances", hv, cv));
        }
        let value = DenseMatrix::from_fn(hv.rows(), cv.rows(), |i, k| {
            hv.row(i).iter().zip(cv.row(k)).map(|(a, b)| (a - b) * (a - b)).sum()
        });
        Ok(self.push(value, Op::SquaredDistances(h, c)))
    }

    /// Elementwise `1 / (1 + x)`.
    pub fn student_kernel(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / (1.0 + x));
        self.push(value, Op::StudentKernel(a))
    }

    /// Divide each row by its sum. Rows must have a positive sum.
    pub fn normalize_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let sums = x.row_sums();
        if let Some(i) = sums.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Numeric(format!("normalize_rows: row {i} has non-positive sum")));
        }
        let mut value = x.clone();
        for (i, s) in sums.iter().enumerate() {
            value.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        Ok(self.push(value, Op::NormalizeRows { input: a, sums }))
    }

    /// Whether `from` depends (transitively) on `to`.
    pub fn depends_on(&self, from: Var, to: Var) -> bool {
        if from.0 < to.0 {
            return false;
        }
        let mut seen = vec![false; from.0 + 1];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen[v.0] || v.0 < to.0 {
                continue;
            }
            seen[v.0] = true;
            stack.extend(self.nodes[v.0].op.inputs());
        }
        false
    }

    /// Parameters reachable backwards from `v`.
    pub fn param_dependencies(&self, v: Var) -> Vec<ParamId> {
        let mut seen = vec![false; v.0 + 1];
        let mut stack = vec![v];
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            if seen[u.0] {
                continue;
            }
            seen[u.0] = true;
            if let Op::Param(id) = self.nodes[u.0].op {
                out.push(id);
            }
            stack.extend(self.nodes[u.0].op.inputs());
        }
        out.sort();
        out.dedup();
        out
    }

    /// Zero every gradient in `store`, then write `∂loss/∂param` for each
    /// parameter recorded on the tape.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Contract(format!("backward needs a scalar loss, got {:?}", lv.shape())));
        }
        store.zero_grads();
        let mut adj: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(DenseMatrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, g, &mut adj, store)?;
        }
        Ok(())
    }

    fn propagate(
        &self,
        node: &Node<'g>,
        g: DenseMatrix,
        adj: &mut [Option<DenseMatrix>],
        store: &mut ParamStore,
    ) -> Result<()> {
        let mut send = |v: Var, grad: DenseMatrix| -> Result<()> {
            if !self.nodes[v.0].requires_grad {
                return Ok(());
            }
            match &mut adj[v.0] {
                Some(acc) => acc.add_assign(&grad),
                slot => {
                    *slot = Some(grad);
                    Ok(())
                }
            }
        };
        let wants = |v: Var| self.nodes[v.0].requires_grad;

        match &node.op {
            Op::Constant => {}
            Op::Param(id) => store.get_mut(*id).grad.add_assign(&g)?,
            Op::MatMul(a, b) => {
                if wants(*a) {
                    send(*a, g.matmul_t(self.value(*b))?)?;
                }
                if wants(*b) {
                    send(*b, self.value(*a).t_matmul(&g)?)?;
                }
            }
            Op::Transpose(a) => send(*a, g.transpose())?,
            Op::SparseMatMul(s, b) => send(*b, s.transpose_matmul_dense(&g)?)?,
            Op::Add(a, b) => {
                if wants(*b) {
                    send(*b, g.clone())?;
                }
                send(*a, g)?;
            }
            Op::Sub(a, b) => {
                if wants(*b) {
                    send(*b, g.scale(-1.0))?;
                }
                send(*a, g)?;
            }
            Op::Scale(a, c) => send(*a, g.scale(*c))?,
            Op::AddRowVector(a, bias) => {
                if wants(*bias) {
                    let cs = g.col_sums();
                    send(*bias, DenseMatrix::new(1, cs.len(), cs)?)?;
                }
                send(*a, g)?;
            }
            Op::Hadamard(a, b) => {
                if wants(*a) {
                    send(*a, g.hadamard(self.value(*b))?)?;
                }
                if wants(*b) {
                    send(*b, g.hadamard(self.value(*a))?)?;
                }
            }
            Op::Relu(a) => {
                let mask = &node.value;
                send(*a, g.zip_map(mask, |gv, y| if y > 0.0 { gv } else { 0.0 })?)?;
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut out = g;
                for i in 0..out.rows() {
                    let yr = y.row(i);
                    let dot: f64 = out.row(i).iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (o, yv) in out.row_mut(i).iter_mut().zip(yr) {
                        *o = yv * (*o - dot);
                    }
                }
                send(*a, out)?;
            }
            Op::LogSoftmaxRows(a) => {
                let l = &node.value;
                let mut out = g;
                for i in 0..out.rows() {
                    let total: f64 = out.row(i).iter().sum();
                    for (o, lv) in out.row_mut(i).iter_mut().zip(l.row(i)) {
                        *o -= lv.exp() * total;
                    }
                }
                send(*a, out)?;
            }
            Op::Log(a) => send(*a, g.zip_map(self.value(*a), |gv, x| gv / x)?)?,
            Op::Dropout { input, mask } => send(*input, g.hadamard(mask)?)?,
            Op::ColumnL2Normalize { input, divisors } => {
                let y = &node.value;
                // per column: (g − y·(yᵀg)) / ‖x‖, identity for guarded columns
                let mut dots = vec![0.0; y.cols()];
                for i in 0..y.rows() {
                    for ((d, yv), gv) in dots.iter_mut().zip(y.row(i)).zip(g.row(i)) {
                        *d += yv * gv;
                    }
                }
                let x_norms = self.value(*input).column_norms();
                let mut out = g;
                for i in 0..out.rows() {
                    let yr = y.row(i);
                    for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                        if x_norms[j] <= ops::ZERO_COLUMN_GUARD {
                            continue;
                        }
                        *o = (*o - yr[j] * dots[j]) / divisors[j];
                    }
                }
                send(*input, out)?;
            }
            Op::FrobeniusSqDiff(a, b) => {
                let s = g.item();
                let diff = self.value(*a).sub(self.value(*b))?;
                if wants(*b) {
                    send(*b, diff.scale(-2.0 * s))?;
                }
                send(*a, diff.scale(2.0 * s))?;
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                send(*a, DenseMatrix::filled(r, c, g.item()))?;
            }
            Op::GatherRows { input, rows } => {
                let (r, c) = self.value(*input).shape();
                let mut out = DenseMatrix::zeros(r, c);
                for (k, &i) in rows.iter().enumerate() {
                    for (o, gv) in out.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += gv;
                    }
                }
                send(*input, out)?;
            }
            Op::SquaredDistances(h, c) => {
                let (hv, cv) = (self.value(*h), self.value(*c));
                if wants(*h) {
                    // 2 (rowsum(G) ⊙ H − G C)
                    let mut dh = g.matmul(cv)?.scale(-2.0);
                    for (i, rs) in g.row_sums().iter().enumerate() {
                        for (o, x) in dh.row_mut(i).iter_mut().zip(hv.row(i)) {
                            *o += 2.0 * rs * x;
                        }
                    }
                    send(*h, dh)?;
                }
                if wants(*c) {
                    // 2 (colsum(G) ⊙ C − Gᵀ H)
                    let mut dc = g.t_matmul(hv)?.scale(-2.0);
                    for (k, cs) in g.col_sums().iter().enumerate() {
                        for (o, x) in dc.row_mut(k).iter_mut().zip(cv.row(k)) {
                            *o += 2.0 * cs * x;
                        }
                    }
                    send(*c, dc)?;
                }
            }
            Op::StudentKernel(a) => {
                // d/dx (1+x)^-1 = −(1+x)^-2 = −y²
                send(*a, g.zip_map(&node.value, |gv, y| -gv * y * y)?)?;
            }
            Op::NormalizeRows { input, sums } => {
                let y = &node.value;
                let mut out = g;
                for (i, s) in sums.iter().enumerate() {
                    let dot: f64 = out.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                    out.row_mut(i).iter_mut().for_each(|o| *o = (*o - dot) / s);
                }
                send(*input, out)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Parameter;

    fn store_with(m: DenseMatrix) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add(Parameter::new("w", m));
        (s, id)
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let (mut store, id) = store_with(DenseMatrix::from_fn(3, 4, |i, j| (i + j) as f64));
        let mut t = Tape::new();
        let w = t.param(&store, id);
        let loss = t.sum(w);
        t.backward(loss, &mut store).unwrap();
        assert_eq!(*store.grad(id), DenseMatrix::filled(3, 4, 1.0));
    }

    #[test]
    fn squared_norm_gradient_is_twice_value() {
        let w0 = DenseMatrix::from_fn(2, 3, |i, j| i as f64 - 0.5 * j as f64);
        let (mut store, id) = store_with(w0.clone());
        let mut t = Tape::new();
        let w = t.param(&store, id);
        let z = t.constant(DenseMatrix::zeros(2, 3));
        let loss = t.frobenius_sq_diff(w, z).unwrap();
        t.backward(loss, &mut store).unwrap();
        assert_eq!(*store.grad(id), w0.scale(2.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let (mut store, id) = store_with(DenseMatrix::zeros(2, 2));
        let mut t = Tape::new();
        let w = t.param(&store, id);
        assert!(matches!(t.backward(w, &mut store), Err(Error::Contract(_))));
    }

    #[test]
    fn gradients_reset_between_passes() {
        let (mut store, id) = store_with(DenseMatrix::filled(1, 2, 1.0));
        for _ in 0..3 {
            let mut t = Tape::new();
            let w = t.param(&store, id);
            let loss = t.sum(w);
            t.backward(loss, &mut store).unwrap();
        }
        assert_eq!(*store.grad(id), DenseMatrix::filled(1, 2, 1.0));
    }

    #[test]
    fn detached_constants_have_no_path_to_params() {
        let (store, id) = store_with(DenseMatrix::filled(2, 2, 0.3));
        let mut t = Tape::new();
        let w = t.param(&store, id);
        let s = t.softmax_rows(w).unwrap();
        let detached = t.constant(t.value(s).clone());
        assert!(t.depends_on(s, w));
        assert!(!t.depends_on(detached, w));
        assert!(t.param_dependencies(detached).is_empty());
        assert_eq!(t.param_dependencies(s), vec![id]);
    }

    #[test]
    fn evaluation_dropout_records_nothing() {
        let mut t = Tape::new();
        let x = t.constant(DenseMatrix::filled(2, 2, 1.0));
        let mut rng = RngState::new(0);
        let y = t.dropout(x, 0.5, &mut rng, false).unwrap();
        assert_eq!(x, y);
        assert_eq!(t.len(), 1);
    }
}
