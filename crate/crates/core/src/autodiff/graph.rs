use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::numerics::Matrix;
use num_traits::Float;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LeafKind {
    Constant,
    Param,
    /// Row-indexed input; row `r` belongs to sample `r % n_samples`.
    Data,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf(LeafKind),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Tanh(Var),
    Sigmoid(Var),
    LogAddExp(Var, Var),
    SumCols(Var),
    SumRows(Var),
    BroadcastCol(Var),
    BroadcastRow(Var),
    SelectCols(Var, Rc<[usize]>),
    ScatterCols(Var, Rc<[usize]>),
    ConcatRows(Var, Var),
    SliceRows(Var, usize),
    PadRows(Var, usize),
    Reshape(Var),
}

impl Op {
    fn parents(&self) -> [Option<Var>; 2] {
        use Op::*;
        match *self {
            Leaf(_) => [None, None],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) | MulRow(a, b)
            | LogAddExp(a, b) | ConcatRows(a, b) => [Some(a), Some(b)],
            Transpose(a) | Neg(a) | Scale(a, _) | AddScalar(a) | Exp(a) | Tanh(a) | Sigmoid(a)
            | SumCols(a) | SumRows(a) | BroadcastCol(a) | BroadcastRow(a) | SelectCols(a, _)
            | ScatterCols(a, _) | SliceRows(a, _) | PadRows(a, _)
            | Reshape(a) => {
                [Some(a), None]
            }
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
    /// Depends on a row-indexed data leaf.
    row_dep: bool,
    /// Depends on a parameter leaf.
    param_dep: bool,
}

/// Tape of matrix-valued operations with reverse-mode differentiation.
///
/// Every node stores its value eagerly. [`Graph::grad`] records the
/// backward pass as new nodes, so gradients can be differentiated again;
/// [`Graph::backward`] is the plain numeric pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn add_row_values(a: &Matrix, row: &Matrix) -> Matrix {
    assert_eq!(row.rows(), 1, "row operand must have one row");
    assert_eq!(a.cols(), row.cols(), "row operand width mismatch");
    let mut out = a.clone();
    let r = row.as_slice();
    for i in 0..out.rows() {
        for (o, &v) in out.row_mut(i).iter_mut().zip(r) {
            *o += v;
        }
    }
    out
}

fn mul_row_values(a: &Matrix, row: &Matrix) -> Matrix {
    assert_eq!(row.rows(), 1, "row operand must have one row");
    assert_eq!(a.cols(), row.cols(), "row operand width mismatch");
    let mut out = a.clone();
    let r = row.as_slice();
    for i in 0..out.rows() {
        for (o, &v) in out.row_mut(i).iter_mut().zip(r) {
            *o *= v;
        }
    }
    out
}

fn sum_cols_values(a: &Matrix) -> Matrix {
    let data = (0..a.rows()).map(|i| a.row(i).iter().sum()).collect();
    Matrix::from_vec(a.rows(), 1, data)
}

fn sum_rows_values(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, a.cols());
    for i in 0..a.rows() {
        for (o, &v) in out.as_mut_slice().iter_mut().zip(a.row(i)) {
            *o += v;
        }
    }
    out
}

fn broadcast_col_values(a: &Matrix, cols: usize) -> Matrix {
    assert_eq!(a.cols(), 1, "broadcast_col expects a column");
    let mut out = Matrix::zeros(a.rows(), cols);
    for i in 0..a.rows() {
        let v = a[(i, 0)];
        out.row_mut(i).iter_mut().for_each(|o| *o = v);
    }
    out
}

fn broadcast_row_values(a: &Matrix, rows: usize) -> Matrix {
    assert_eq!(a.rows(), 1, "broadcast_row expects a row");
    let mut out = Matrix::zeros(rows, a.cols());
    for i in 0..rows {
        out.row_mut(i).copy_from_slice(a.as_slice());
    }
    out
}

fn select_cols_values(a: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), idx.len());
    for i in 0..a.rows() {
        let src = a.row(i);
        for (o, &j) in out.row_mut(i).iter_mut().zip(idx) {
            *o = src[j];
        }
    }
    out
}

fn scatter_cols_values(a: &Matrix, idx: &[usize], total: usize) -> Matrix {
    assert_eq!(a.cols(), idx.len(), "scatter width mismatch");
    let mut out = Matrix::zeros(a.rows(), total);
    for i in 0..a.rows() {
        let src = a.row(i);
        let dst = out.row_mut(i);
        for (&v, &j) in src.iter().zip(idx) {
            dst[j] = v;
        }
    }
    out
}

fn slice_rows_values(a: &Matrix, start: usize, len: usize) -> Matrix {
    assert!(start + len <= a.rows(), "row slice out of range");
    let c = a.cols();
    Matrix::from_vec(len, c, a.as_slice()[start * c..(start + len) * c].to_vec())
}

fn pad_rows_values(a: &Matrix, start: usize, total: usize) -> Matrix {
    assert!(start + a.rows() <= total, "row padding out of range");
    let c = a.cols();
    let mut out = Matrix::zeros(total, c);
    out.as_mut_slice()[start * c..(start + a.rows()) * c].copy_from_slice(a.as_slice());
    out
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "node is not a scalar");
        m[(0, 0)]
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let (mut row_dep, mut param_dep) = match op {
            Op::Leaf(LeafKind::Data) => (true, false),
            Op::Leaf(LeafKind::Param) => (false, true),
            _ => (false, false),
        };
        for p in op.parents().into_iter().flatten() {
            row_dep |= self.nodes[p.0].row_dep;
            param_dep |= self.nodes[p.0].param_dep;
        }
        self.nodes.push(Node {
            value,
            op,
            row_dep,
            param_dep,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs_grad(&self, v: Var) -> bool {
        let n = &self.nodes[v.0];
        n.row_dep || n.param_dep
    }

    /// Leaf that is never differentiated.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf(LeafKind::Constant))
    }

    /// Trainable parameter leaf.
    pub fn param(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf(LeafKind::Param))
    }

    /// Row-indexed data leaf (one row per sample).
    pub fn data(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf(LeafKind::Data))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).sub(self.value(b));
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).hadamard(self.value(b));
        self.push(v, Op::Mul(a, b))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// Adds a `1×c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = add_row_values(self.value(a), self.value(row));
        self.push(v, Op::AddRow(a, row))
    }

    /// Multiplies every row of `a` elementwise by a `1×c` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let v = mul_row_values(self.value(a), self.value(row));
        self.push(v, Op::MulRow(a, row))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = self.value(a).scale(-1.0);
        self.push(v, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.exp());
        self.push(v, Op::Exp(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Elementwise `log(exp(a) + exp(b))`.
    pub fn log_add_exp(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), log_add_exp);
        self.push(v, Op::LogAddExp(a, b))
    }

    /// Row sums as an `r×1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = sum_cols_values(self.value(a));
        self.push(v, Op::SumCols(a))
    }

    /// Column sums as a `1×c` row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = sum_rows_values(self.value(a));
        self.push(v, Op::SumRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.sum_cols(a);
        self.sum_rows(s)
    }

    /// Mean over all entries as a 1×1 node.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let s = self.sum_all(a);
        self.scale(s, 1.0 / (r * c) as f64)
    }

    pub fn broadcast_col(&mut self, a: Var, cols: usize) -> Var {
        let v = broadcast_col_values(self.value(a), cols);
        self.push(v, Op::BroadcastCol(a))
    }

    pub fn broadcast_row(&mut self, a: Var, rows: usize) -> Var {
        let v = broadcast_row_values(self.value(a), rows);
        self.push(v, Op::BroadcastRow(a))
    }

    pub fn select_cols(&mut self, a: Var, idx: &[usize]) -> Var {
        self.select_cols_rc(a, Rc::from(idx))
    }

    fn select_cols_rc(&mut self, a: Var, idx: Rc<[usize]>) -> Var {
        let v = select_cols_values(self.value(a), &idx);
        self.push(v, Op::SelectCols(a, idx))
    }

    /// Places the columns of `a` at positions `idx` of a `total`-wide zero matrix.
    pub fn scatter_cols(&mut self, a: Var, idx: &[usize], total: usize) -> Var {
        self.scatter_cols_rc(a, Rc::from(idx), total)
    }

    fn scatter_cols_rc(&mut self, a: Var, idx: Rc<[usize]>, total: usize) -> Var {
        let v = scatter_cols_values(self.value(a), &idx, total);
        self.push(v, Op::ScatterCols(a, idx))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).vstack(self.value(b));
        self.push(v, Op::ConcatRows(a, b))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = slice_rows_values(self.value(a), start, len);
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn pad_rows(&mut self, a: Var, start: usize, total: usize) -> Var {
        let v = pad_rows_values(self.value(a), start, total);
        self.push(v, Op::PadRows(a, start))
    }

    /// Same row-major data read as `rows × cols`.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows() * src.cols(), rows * cols, "reshape must keep the element count");
        let v = Matrix::from_vec(rows, cols, src.as_slice().to_vec());
        self.push(v, Op::Reshape(a))
    }

    fn ones_like(&mut self, v: Var) -> Var {
        let (r, c) = self.shape(v);
        self.constant(Matrix::filled(r, c, 1.0))
    }

    /// Gradients of `sum(output)` with respect to `wrt`, recorded on the
    /// tape so the results can be differentiated again.
    ///
    /// Only nodes lying on a path from some `wrt` to `output` are visited,
    /// so the adjoint of an intermediate node is the partial derivative
    /// holding its own ancestors fixed.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Vec<Var> {
        let n = output.0 + 1;
        let mut desc = vec![false; n];
        for w in wrt {
            if w.0 < n {
                desc[w.0] = true;
            }
        }
        for i in 0..n {
            if !desc[i] {
                desc[i] = self.nodes[i]
                    .op
                    .parents()
                    .into_iter()
                    .flatten()
                    .any(|p| desc[p.0]);
            }
        }
        let mut adj: Vec<Option<Var>> = vec![None; n];
        if desc[output.0] {
            adj[output.0] = Some(self.ones_like(output));
        }
        for i in (0..n).rev() {
            let Some(g) = adj[i] else { continue };
            if !desc[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let node = Var(i);
            self.backprop_graph(node, &op, g, &desc, &mut adj);
        }
        wrt.iter()
            .map(|w| match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = self.shape(*w);
                    self.constant(Matrix::zeros(r, c))
                }
            })
            .collect()
    }

    fn accumulate(&mut self, adj: &mut [Option<Var>], target: Var, contrib: Var) {
        adj[target.0] = Some(match adj[target.0] {
            Some(existing) => self.add(existing, contrib),
            None => contrib,
        });
    }

    fn backprop_graph(&mut self, node: Var, op: &Op, g: Var, desc: &[bool], adj: &mut [Option<Var>]) {
        let wants = |v: Var| desc[v.0];
        match *op {
            Op::Leaf(_) => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    let bt = self.transpose(b);
                    let c = self.matmul(g, bt);
                    self.accumulate(adj, a, c);
                }
                if wants(b) {
                    let at = self.transpose(a);
                    let c = self.matmul(at, g);
                    self.accumulate(adj, b, c);
                }
            }
            Op::Transpose(a) => {
                if wants(a) {
                    let c = self.transpose(g);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Add(a, b) => {
                if wants(a) {
                    self.accumulate(adj, a, g);
                }
                if wants(b) {
                    self.accumulate(adj, b, g);
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    self.accumulate(adj, a, g);
                }
                if wants(b) {
                    let c = self.neg(g);
                    self.accumulate(adj, b, c);
                }
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    let c = self.mul(g, b);
                    self.accumulate(adj, a, c);
                }
                if wants(b) {
                    let c = self.mul(g, a);
                    self.accumulate(adj, b, c);
                }
            }
            Op::AddRow(a, row) => {
                if wants(a) {
                    self.accumulate(adj, a, g);
                }
                if wants(row) {
                    let c = self.sum_rows(g);
                    self.accumulate(adj, row, c);
                }
            }
            Op::MulRow(a, row) => {
                if wants(a) {
                    let c = self.mul_row(g, row);
                    self.accumulate(adj, a, c);
                }
                if wants(row) {
                    let ga = self.mul(g, a);
                    let c = self.sum_rows(ga);
                    self.accumulate(adj, row, c);
                }
            }
            Op::Neg(a) => {
                if wants(a) {
                    let c = self.neg(g);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Scale(a, k) => {
                if wants(a) {
                    let c = self.scale(g, k);
                    self.accumulate(adj, a, c);
                }
            }
            Op::AddScalar(a) => {
                if wants(a) {
                    self.accumulate(adj, a, g);
                }
            }
            Op::Exp(a) => {
                if wants(a) {
                    let c = self.mul(g, node);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Tanh(a) => {
                if wants(a) {
                    let t2 = self.square(node);
                    let nt2 = self.neg(t2);
                    let d = self.add_scalar(nt2, 1.0);
                    let c = self.mul(g, d);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Sigmoid(a) => {
                if wants(a) {
                    let ns = self.neg(node);
                    let one_minus = self.add_scalar(ns, 1.0);
                    let d = self.mul(node, one_minus);
                    let c = self.mul(g, d);
                    self.accumulate(adj, a, c);
                }
            }
            Op::LogAddExp(a, b) => {
                if wants(a) {
                    let diff = self.sub(a, b);
                    let w = self.sigmoid(diff);
                    let c = self.mul(g, w);
                    self.accumulate(adj, a, c);
                }
                if wants(b) {
                    let diff = self.sub(b, a);
                    let w = self.sigmoid(diff);
                    let c = self.mul(g, w);
                    self.accumulate(adj, b, c);
                }
            }
            Op::SumCols(a) => {
                if wants(a) {
                    let cols = self.shape(a).1;
                    let c = self.broadcast_col(g, cols);
                    self.accumulate(adj, a, c);
                }
            }
            Op::SumRows(a) => {
                if wants(a) {
                    let rows = self.shape(a).0;
                    let c = self.broadcast_row(g, rows);
                    self.accumulate(adj, a, c);
                }
            }
            Op::BroadcastCol(a) => {
                if wants(a) {
                    let c = self.sum_cols(g);
                    self.accumulate(adj, a, c);
                }
            }
            Op::BroadcastRow(a) => {
                if wants(a) {
                    let c = self.sum_rows(g);
                    self.accumulate(adj, a, c);
                }
            }
            Op::SelectCols(a, ref idx) => {
                if wants(a) {
                    let total = self.shape(a).1;
                    let c = self.scatter_cols_rc(g, idx.clone(), total);
                    self.accumulate(adj, a, c);
                }
            }
            Op::ScatterCols(a, ref idx) => {
                if wants(a) {
                    let c = self.select_cols_rc(g, idx.clone());
                    self.accumulate(adj, a, c);
                }
            }
            Op::ConcatRows(a, b) => {
                let ra = self.shape(a).0;
                let rb = self.shape(b).0;
                if wants(a) {
                    let c = self.slice_rows(g, 0, ra);
                    self.accumulate(adj, a, c);
                }
                if wants(b) {
                    let c = self.slice_rows(g, ra, rb);
                    self.accumulate(adj, b, c);
                }
            }
            Op::SliceRows(a, start) => {
                if wants(a) {
                    let total = self.shape(a).0;
                    let c = self.pad_rows(g, start, total);
                    self.accumulate(adj, a, c);
                }
            }
            Op::PadRows(a, start) => {
                if wants(a) {
                    let len = self.shape(a).0;
                    let c = self.slice_rows(g, start, len);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Reshape(a) => {
                if wants(a) {
                    let (r, c) = self.shape(a);
                    let back = self.reshape(g, r, c);
                    self.accumulate(adj, a, back);
                }
            }
        }
    }

    /// Numeric reverse pass from `output`, seeded with ones (or `seed`).
    ///
    /// Returns the adjoint of every node that influences `output` and
    /// depends on a parameter or data leaf.
    pub fn backward(&self, output: Var, seed: Option<&Matrix>) -> Vec<Option<Matrix>> {
        let n = output.0 + 1;
        let mut adj: Vec<Option<Matrix>> = vec![None; n];
        let (r, c) = self.shape(output);
        adj[output.0] = Some(match seed {
            Some(s) => {
                assert_eq!(s.shape(), (r, c), "seed shape mismatch");
                s.clone()
            }
            None => Matrix::filled(r, c, 1.0),
        });
        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.backprop_numeric(i, &g, &mut adj);
            adj[i] = Some(g);
        }
        adj
    }

    fn backprop_numeric(&self, i: usize, g: &Matrix, adj: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |target: Var, contrib: Matrix| {
            if !self.needs_grad(target) {
                return;
            }
            match &mut adj[target.0] {
                Some(existing) => existing.add_assign(&contrib),
                slot => *slot = Some(contrib),
            }
        };
        let wants = |v: Var| self.needs_grad(v);
        match node.op {
            Op::Leaf(_) => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    acc(a, g.matmul_t(val(b)));
                }
                if wants(b) {
                    acc(b, val(a).t_matmul(g));
                }
            }
            Op::Transpose(a) => acc(a, g.transpose()),
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    acc(a, g.hadamard(val(b)));
                }
                if wants(b) {
                    acc(b, g.hadamard(val(a)));
                }
            }
            Op::AddRow(a, row) => {
                acc(a, g.clone());
                if wants(row) {
                    acc(row, sum_rows_values(g));
                }
            }
            Op::MulRow(a, row) => {
                if wants(a) {
                    acc(a, mul_row_values(g, val(row)));
                }
                if wants(row) {
                    acc(row, sum_rows_values(&g.hadamard(val(a))));
                }
            }
            Op::Neg(a) => acc(a, g.scale(-1.0)),
            Op::Scale(a, k) => acc(a, g.scale(k)),
            Op::AddScalar(a) => acc(a, g.clone()),
            Op::Exp(a) => acc(a, g.hadamard(&node.value)),
            Op::Tanh(a) => acc(a, g.zip_map(&node.value, |gi, t| gi * (1.0 - t * t))),
            Op::Sigmoid(a) => acc(a, g.zip_map(&node.value, |gi, s| gi * s * (1.0 - s))),
            Op::LogAddExp(a, b) => {
                let (va, vb) = (val(a), val(b));
                if wants(a) {
                    let w = va.zip_map(vb, |x, y| sigmoid(x - y));
                    acc(a, g.hadamard(&w));
                }
                if wants(b) {
                    let w = vb.zip_map(va, |x, y| sigmoid(x - y));
                    acc(b, g.hadamard(&w));
                }
            }
            Op::SumCols(a) => {
                let cols = val(a).cols();
                acc(a, broadcast_col_values(g, cols));
            }
            Op::SumRows(a) => {
                let rows = val(a).rows();
                acc(a, broadcast_row_values(g, rows));
            }
            Op::BroadcastCol(a) => acc(a, sum_cols_values(g)),
            Op::BroadcastRow(a) => acc(a, sum_rows_values(g)),
            Op::SelectCols(a, ref idx) => {
                let total = val(a).cols();
                acc(a, scatter_cols_values(g, idx, total));
            }
            Op::ScatterCols(a, ref idx) => acc(a, select_cols_values(g, idx)),
            Op::ConcatRows(a, b) => {
                let ra = val(a).rows();
                let rb = val(b).rows();
                acc(a, slice_rows_values(g, 0, ra));
                acc(b, slice_rows_values(g, ra, rb));
            }
            Op::SliceRows(a, start) => {
                let total = val(a).rows();
                acc(a, pad_rows_values(g, start, total));
            }
            Op::PadRows(a, start) => {
                let len = val(a).rows();
                acc(a, slice_rows_values(g, start, len));
            }
            Op::Reshape(a) => {
                let (r, c) = val(a).shape();
                acc(a, Matrix::from_vec(r, c, g.as_slice().to_vec()));
            }
        }
    }

    /// Adjoints of `sum(output)` for the listed leaves (zeros when unreachable).
    pub fn gradients(&self, output: Var, wrt: &[Var]) -> Vec<Matrix> {
        let adj = self.backward(output, None);
        wrt.iter()
            .map(|w| {
                adj.get(w.0)
                    .cloned()
                    .flatten()
                    .unwrap_or_else(|| {
                        let (r, c) = self.shape(*w);
                        Matrix::zeros(r, c)
                    })
            })
            .collect()
    }

    /// Per-sample gradients of the rows of `output` with respect to `params`.
    ///
    /// Row `r` of every data-dependent node belongs to sample
    /// `r % n_samples`; the result has one row per sample and the flattened
    /// parameters (in `params` order) as columns. Parameters may only enter
    /// data-dependent nodes through `matmul(data, p)`, `add_row` and
    /// `mul_row`; parameter-only subexpressions may use transpose, matmul,
    /// column selection, reshapes, row/column sums, the elementwise unary ops, and
    /// sums/products of other parameter-only nodes.
    pub fn per_sample_gradients(
        &self,
        output: Var,
        params: &[Var],
        n_samples: usize,
    ) -> Result<Matrix> {
        assert!(n_samples > 0);
        let adj = self.backward(output, None);
        let n = output.0 + 1;
        let param_only = |v: Var| {
            let node = &self.nodes[v.0];
            node.param_dep && !node.row_dep
        };
        let size = |v: Var| {
            let (r, c) = self.shape(v);
            r * c
        };
        // per-sample gradients of parameter-only nodes, n_samples × size
        let mut psg: Vec<Option<Matrix>> = vec![None; n];
        fn slot(psg: &mut [Option<Matrix>], v: Var, rows: usize, cols: usize) -> &mut Matrix {
            psg[v.0].get_or_insert_with(|| Matrix::zeros(rows, cols))
        }
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.param_dep {
                continue;
            }
            if node.row_dep {
                let Some(delta) = adj[i].as_ref() else { continue };
                for p in node.op.parents().into_iter().flatten() {
                    if !param_only(p) {
                        continue;
                    }
                    let cols = size(p);
                    match node.op {
                        Op::MatMul(a, b) if b == p && !param_only(a) => {
                            let x = self.value(a);
                            let c = delta.cols();
                            let out = slot(&mut psg, p, n_samples, cols);
                            for r in 0..x.rows() {
                                let s = r % n_samples;
                                let xr = x.row(r);
                                let dr = delta.row(r);
                                let dst = out.row_mut(s);
                                for (k, &xv) in xr.iter().enumerate() {
                                    if xv == 0.0 {
                                        continue;
                                    }
                                    for (o, &dv) in dst[k * c..(k + 1) * c].iter_mut().zip(dr) {
                                        *o += xv * dv;
                                    }
                                }
                            }
                        }
                        Op::AddRow(a, row) if row == p && !param_only(a) => {
                            let out = slot(&mut psg, p, n_samples, cols);
                            for r in 0..delta.rows() {
                                let dst = out.row_mut(r % n_samples);
                                for (o, &dv) in dst.iter_mut().zip(delta.row(r)) {
                                    *o += dv;
                                }
                            }
                        }
                        Op::MulRow(a, row) if row == p && !param_only(a) => {
                            let x = self.value(a);
                            let out = slot(&mut psg, p, n_samples, cols);
                            for r in 0..delta.rows() {
                                let dst = out.row_mut(r % n_samples);
                                for ((o, &dv), &xv) in dst.iter_mut().zip(delta.row(r)).zip(x.row(r)) {
                                    *o += dv * xv;
                                }
                            }
                        }
                        _ => {
                            return Err(Error::Unsupported(
                                "parameter enters data path through an unsupported op",
                            ))
                        }
                    }
                }
            } else {
                let Some(g) = psg[i].take() else { continue };
                let value = &node.value;
                match node.op {
                    Op::Leaf(_) => {
                        psg[i] = Some(g);
                        continue;
                    }
                    Op::Transpose(a) => {
                        let (r, c) = value.shape();
                        let out = slot(&mut psg, a, n_samples, r * c);
                        for s in 0..n_samples {
                            let src = g.row(s);
                            let dst = out.row_mut(s);
                            // value[i][j] = a[j][i]; a has shape c×r
                            for ii in 0..r {
                                for jj in 0..c {
                                    dst[jj * r + ii] += src[ii * c + jj];
                                }
                            }
                        }
                    }
                    Op::Exp(a) => {
                        let d = value.as_slice();
                        add_scaled_rows(slot(&mut psg, a, n_samples, d.len()), &g, |k| d[k]);
                    }
                    Op::Tanh(a) => {
                        let d = value.as_slice();
                        add_scaled_rows(slot(&mut psg, a, n_samples, d.len()), &g, |k| {
                            1.0 - d[k] * d[k]
                        });
                    }
                    Op::Sigmoid(a) => {
                        let d = value.as_slice();
                        add_scaled_rows(slot(&mut psg, a, n_samples, d.len()), &g, |k| {
                            d[k] * (1.0 - d[k])
                        });
                    }
                    Op::Neg(a) => {
                        add_scaled_rows(slot(&mut psg, a, n_samples, g.cols()), &g, |_| -1.0)
                    }
                    Op::Scale(a, k) => {
                        add_scaled_rows(slot(&mut psg, a, n_samples, g.cols()), &g, |_| k)
                    }
                    Op::AddScalar(a) => {
                        add_scaled_rows(slot(&mut psg, a, n_samples, g.cols()), &g, |_| 1.0)
                    }
                    Op::MatMul(a, b) => {
                        let va = self.value(a);
                        let vb = self.value(b);
                        let (r, k) = va.shape();
                        let c = vb.cols();
                        for s in 0..n_samples {
                            let gs = Matrix::from_vec(r, c, g.row(s).to_vec());
                            if param_only(a) {
                                let da = gs.matmul_t(vb);
                                let dst = slot(&mut psg, a, n_samples, r * k).row_mut(s);
                                dst.iter_mut().zip(da.as_slice()).for_each(|(o, v)| *o += v);
                            }
                            if param_only(b) {
                                let db = va.t_matmul(&gs);
                                let dst = slot(&mut psg, b, n_samples, k * c).row_mut(s);
                                dst.iter_mut().zip(db.as_slice()).for_each(|(o, v)| *o += v);
                            }
                        }
                    }
                    Op::SelectCols(a, ref idx) => {
                        let (r, c) = self.shape(a);
                        let m = idx.len();
                        let out = slot(&mut psg, a, n_samples, r * c);
                        for s in 0..n_samples {
                            let src = g.row(s);
                            let dst = out.row_mut(s);
                            for i in 0..r {
                                for (j, &col) in idx.iter().enumerate() {
                                    dst[i * c + col] += src[i * m + j];
                                }
                            }
                        }
                    }
                    Op::Reshape(a) => {
                        add_scaled_rows(slot(&mut psg, a, n_samples, g.cols()), &g, |_| 1.0)
                    }
                    Op::SumCols(a) | Op::SumRows(a) => {
                        let (r, c) = self.shape(a);
                        let by_row = matches!(node.op, Op::SumCols(..));
                        add_scaled_rows_from(slot(&mut psg, a, n_samples, r * c), &g, |k| {
                            if by_row {
                                k / c
                            } else {
                                k % c
                            }
                        });
                    }
                    Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                        let sign_b = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                        let is_mul = matches!(node.op, Op::Mul(..));
                        let va = self.value(a).as_slice();
                        let vb = self.value(b).as_slice();
                        if param_only(a) {
                            add_scaled_rows(slot(&mut psg, a, n_samples, g.cols()), &g, |k| {
                                if is_mul {
                                    vb[k]
                                } else {
                                    1.0
                                }
                            });
                        }
                        if param_only(b) {
                            add_scaled_rows(slot(&mut psg, b, n_samples, g.cols()), &g, |k| {
                                if is_mul {
                                    va[k]
                                } else {
                                    sign_b
                                }
                            });
                        }
                    }
                    _ => {
                        return Err(Error::Unsupported(
                            "unsupported op inside a parameter-only subexpression",
                        ))
                    }
                }
            }
        }
        let total: usize = params.iter().map(|&p| size(p)).sum();
        let mut out = Matrix::zeros(n_samples, total);
        let mut offset = 0;
        for &p in params {
            let sz = size(p);
            if let Some(Some(g)) = psg.get(p.0) {
                for s in 0..n_samples {
                    out.row_mut(s)[offset..offset + sz].copy_from_slice(g.row(s));
                }
            }
            offset += sz;
        }
        Ok(out)
    }
}

fn add_scaled_rows(dst: &mut Matrix, src: &Matrix, factor: impl Fn(usize) -> f64) {
    for s in 0..src.rows() {
        let d = dst.row_mut(s);
        for (k, (o, &v)) in d.iter_mut().zip(src.row(s)).enumerate() {
            *o += v * factor(k);
        }
    }
}

/// `dst[s][k] += src[s][source(k)]` for every sample row.
fn add_scaled_rows_from(dst: &mut Matrix, src: &Matrix, source: impl Fn(usize) -> usize) {
    for s in 0..src.rows() {
        let from = src.row(s);
        for (k, o) in dst.row_mut(s).iter_mut().enumerate() {
            *o += from[source(k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn scalar_chain_rule() {
        // f(x) = tanh(2x) * exp(x)
        let mut g = Graph::new();
        let x = g.param(Matrix::from_vec(1, 1, vec![0.3]));
        let two_x = g.scale(x, 2.0);
        let t = g.tanh(two_x);
        let e = g.exp(x);
        let f = g.mul(t, e);
        let grads = g.gradients(f, &[x]);
        let xv = 0.3_f64;
        let expected = 2.0 * (1.0 - (2.0 * xv).tanh().powi(2)) * xv.exp() + (2.0 * xv).tanh() * xv.exp();
        assert!(close(grads[0][(0, 0)], expected, 1e-14));
    }

    #[test]
    fn second_derivative_through_recorded_grad() {
        // f(x) = x^3 -> f'' = 6x
        let mut g = Graph::new();
        let x = g.param(Matrix::from_vec(1, 1, vec![1.7]));
        let x2 = g.square(x);
        let x3 = g.mul(x2, x);
        let d1 = g.grad(x3, &[x])[0];
        assert!(close(g.scalar(d1), 3.0 * 1.7 * 1.7, 1e-14));
        let d2 = g.gradients(d1, &[x]);
        assert!(close(d2[0][(0, 0)], 6.0 * 1.7, 1e-14));
    }

    #[test]
    fn graph_and_numeric_backward_agree() {
        let mut g = Graph::new();
        let x = g.data(Matrix::from_rows(&[&[0.5, -1.0], &[2.0, 0.1], &[-0.3, 0.7]]));
        let w = g.param(Matrix::from_rows(&[&[0.2, -0.4, 1.0], &[0.3, 0.8, -0.5]]));
        let b = g.param(Matrix::row_vector(&[0.1, 0.0, -0.2]));
        let h = g.matmul(x, w);
        let h = g.add_row(h, b);
        let h = g.tanh(h);
        let sel = g.select_cols(h, &[0, 2]);
        let back = g.scatter_cols(sel, &[1, 0], 2);
        let y = g.log_add_exp(back, x);
        let out = g.sum_cols(y);
        let numeric = g.gradients(out, &[x, w, b]);
        let recorded = g.grad(out, &[x, w, b]);
        for (n, r) in numeric.iter().zip(&recorded) {
            assert!(n.sub(g.value(*r)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn reshape_gradients() {
        let mut g = Graph::new();
        let x = g.data(Matrix::from_rows(&[&[0.5, -1.0], &[2.0, 0.1], &[-0.3, 0.7]]));
        let flat = g.param(Matrix::row_vector(&[0.2, -0.4, 0.3, 0.8]));
        let w = g.reshape(flat, 2, 2);
        assert_eq!(g.value(w), &Matrix::from_rows(&[&[0.2, -0.4], &[0.3, 0.8]]));
        let h = g.matmul(x, w);
        let h = g.tanh(h);
        let out = g.sum_cols(h);
        let numeric = g.gradients(out, &[flat, x]);
        let recorded = g.grad(out, &[flat, x]);
        for (n, r) in numeric.iter().zip(&recorded) {
            assert!(n.sub(g.value(*r)).max_abs() < 1e-14);
        }
        assert_eq!(numeric[0].shape(), (1, 4));
        let per = g.per_sample_gradients(out, &[flat], 3).unwrap();
        for k in 0..4 {
            let got: f64 = (0..3).map(|r| per[(r, k)]).sum();
            assert!(close(got, numeric[0][(0, k)], 1e-13));
        }
    }

    #[test]
    fn per_sample_gradients_sum_to_batch_gradient() {
        let mut g = Graph::new();
        let x = g.data(Matrix::from_rows(&[&[0.5, -1.0], &[2.0, 0.1], &[-0.3, 0.7]]));
        let w = g.param(Matrix::from_rows(&[&[0.2, -0.4], &[0.3, 0.8]]));
        let s = g.param(Matrix::row_vector(&[0.1, -0.2]));
        let es = g.exp(s);
        let h = g.matmul(x, w);
        let h = g.mul_row(h, es);
        let h = g.tanh(h);
        let wt = g.transpose(w);
        let h2 = g.matmul(h, wt);
        let out = g.sum_cols(h2);
        let per = g.per_sample_gradients(out, &[w, s], 3).unwrap();
        let batch = g.gradients(out, &[w, s]);
        let flat: Vec<f64> = batch.iter().flat_map(|m| m.as_slice().to_vec()).collect();
        for (k, want) in flat.iter().enumerate() {
            let got: f64 = (0..3).map(|r| per[(r, k)]).sum();
            assert!(close(got, *want, 1e-13), "column {k}: {got} vs {want}");
        }
        // single-row graphs give the per-sample rows directly
        for r in 0..3 {
            let mut g1 = Graph::new();
            let xr = g1.data(Matrix::row_vector(g.value(x).row(r)));
            let w1 = g1.param(g.value(w).clone());
            let s1 = g1.param(g.value(s).clone());
            let es1 = g1.exp(s1);
            let h = g1.matmul(xr, w1);
            let h = g1.mul_row(h, es1);
            let h = g1.tanh(h);
            let wt1 = g1.transpose(w1);
            let h2 = g1.matmul(h, wt1);
            let out1 = g1.sum_cols(h2);
            let grads = g1.gradients(out1, &[w1, s1]);
            let flat1: Vec<f64> = grads.iter().flat_map(|m| m.as_slice().to_vec()).collect();
            for (k, want) in flat1.iter().enumerate() {
                assert!(close(per[(r, k)], *want, 1e-13));
            }
        }
    }

    #[test]
    fn per_sample_rejects_row_mixing() {
        let mut g = Graph::new();
        let x = g.data(Matrix::from_rows(&[&[1.0], &[2.0]]));
        let p = g.param(Matrix::from_rows(&[&[1.0], &[1.0]]));
        let y = g.mul(x, p);
        assert!(g.per_sample_gradients(y, &[p], 2).is_err());
    }
}
