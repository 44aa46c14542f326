//! Reverse-mode automatic differentiation over `ndarray` matrices.
//!
//! A [`Tape`] records a DAG of matrix operations; [`Tape::backward`] walks it
//! once in reverse, accumulating gradients for every node. All model math is
//! expressed through tape ops so a single implementation serves training and
//! inference; an inference tape is built with `recording = false`, which skips
//! op metadata (backward on such a tape is a programming error).
//!
//! Values are `Arc<Array2<f64>>`: pushing a model parameter onto a tape is an
//! Arc clone, not a copy, and extracted values can be shared across threads.
//! Everything is `f64` end to end, which keeps finite-difference checks tight.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis};

pub type NodeId = usize;
pub type Value = Arc<Array2<f64>>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul(NodeId, NodeId),
    /// `A · Bᵀ`
    MatmulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Add a `1×n` row vector to every row of an `m×n` matrix.
    AddRow(NodeId, NodeId),
    /// Multiply every row of an `m×n` matrix by a `1×n` row vector.
    MulRow(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Add a constant matrix (no gradient flows into the constant).
    AddConst(NodeId),
    /// Elementwise multiply by a constant matrix.
    MulConst(NodeId, Value),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SliceRows(NodeId, usize, usize),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Log(NodeId),
    Clamp(NodeId, f64, f64),
    /// Row-wise standardization `(x - μ)/σ`, no affine part.
    LayerNorm(NodeId, f64),
    SumAll(NodeId),
    /// Row lookup into a table (embedding); backward scatter-adds.
    Gather(NodeId, Vec<usize>),
}

struct Node {
    value: Value,
    op: Op,
}

/// Gradients of one backward pass, indexed by node id.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    /// Gradient of a node, zeros if the loss never touched it.
    pub fn get_or_zeros(&self, id: NodeId, shape: (usize, usize)) -> Array2<f64> {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Array2::zeros(shape),
        }
    }
}

pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    recording: bool,
}

impl Tape {
    pub fn new(recording: bool) -> Self {
        Tape { nodes: RefCell::new(Vec::new()), recording }
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Value of a node (cheap Arc clone).
    pub fn value(&self, id: NodeId) -> Value {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let nodes = self.nodes.borrow();
        let v = &nodes[id].value;
        (v.nrows(), v.ncols())
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "scalar() on non-1x1 node");
        v[(0, 0)]
    }

    fn push(&self, value: Array2<f64>, op: Op) -> NodeId {
        self.push_shared(Arc::new(value), op)
    }

    fn push_shared(&self, value: Value, op: Op) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        let op = if self.recording { op } else { Op::Leaf };
        nodes.push(Node { value, op });
        id
    }

    /// Insert an input or parameter. Shared ownership: no copy is made.
    pub fn leaf(&self, value: Value) -> NodeId {
        self.push_shared(value, Op::Leaf)
    }

    pub fn leaf_owned(&self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ncols(), vb.nrows(), "matmul shape mismatch");
        self.push(va.dot(&*vb), Op::Matmul(a, b))
    }

    /// `A · Bᵀ` without materializing the transpose on the tape.
    pub fn matmul_nt(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ncols(), vb.ncols(), "matmul_nt shape mismatch");
        self.push(va.dot(&vb.t()), Op::MatmulNT(a, b))
    }

    pub fn add(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.dim(), vb.dim(), "add shape mismatch");
        self.push(&*va + &*vb, Op::Add(a, b))
    }

    pub fn sub(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.dim(), vb.dim(), "sub shape mismatch");
        self.push(&*va - &*vb, Op::Sub(a, b))
    }

    pub fn mul(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.dim(), vb.dim(), "mul shape mismatch");
        self.push(&*va * &*vb, Op::Mul(a, b))
    }

    pub fn add_row(&self, x: NodeId, row: NodeId) -> NodeId {
        let (vx, vr) = (self.value(x), self.value(row));
        assert_eq!(vr.nrows(), 1, "add_row takes a 1×n row");
        assert_eq!(vx.ncols(), vr.ncols(), "add_row width mismatch");
        self.push(&*vx + &vr.row(0), Op::AddRow(x, row))
    }

    pub fn mul_row(&self, x: NodeId, row: NodeId) -> NodeId {
        let (vx, vr) = (self.value(x), self.value(row));
        assert_eq!(vr.nrows(), 1, "mul_row takes a 1×n row");
        assert_eq!(vx.ncols(), vr.ncols(), "mul_row width mismatch");
        self.push(&*vx * &vr.row(0), Op::MulRow(x, row))
    }

    pub fn scale(&self, x: NodeId, s: f64) -> NodeId {
        self.push(self.value(x).as_ref() * s, Op::Scale(x, s))
    }

    pub fn add_const(&self, x: NodeId, c: Value) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.dim(), c.dim(), "add_const shape mismatch");
        self.push(&*vx + &*c, Op::AddConst(x))
    }

    pub fn mul_const(&self, x: NodeId, c: Value) -> NodeId {
        let vx = self.value(x);
        assert_eq!(vx.dim(), c.dim(), "mul_const shape mismatch");
        self.push(&*vx * &*c, Op::MulConst(x, c))
    }

    pub fn concat_cols(&self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let values: Vec<Value> = parts.iter().map(|&p| self.value(p)).collect();
        let views: Vec<_> = values.iter().map(|v| v.view()).collect();
        let out = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let values: Vec<Value> = parts.iter().map(|&p| self.value(p)).collect();
        let views: Vec<_> = values.iter().map(|v| v.view()).collect();
        let out = concatenate(Axis(0), &views).expect("concat_rows col mismatch");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&self, x: NodeId, start: usize, end: usize) -> NodeId {
        let vx = self.value(x);
        assert!(start < end && end <= vx.ncols(), "slice_cols out of range");
        self.push(vx.slice(s![.., start..end]).to_owned(), Op::SliceCols(x, start, end))
    }

    pub fn slice_rows(&self, x: NodeId, start: usize, end: usize) -> NodeId {
        let vx = self.value(x);
        assert!(start < end && end <= vx.nrows(), "slice_rows out of range");
        self.push(vx.slice(s![start..end, ..]).to_owned(), Op::SliceRows(x, start, end))
    }

    pub fn transpose(&self, x: NodeId) -> NodeId {
        self.push(self.value(x).t().to_owned(), Op::Transpose(x))
    }

    /// Numerically stable row softmax. Entries at `-1e30` (additive masks)
    /// come out exactly zero.
    pub fn softmax_rows(&self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        let mut out = Array2::zeros(vx.dim());
        for (i, row) in vx.rows().into_iter().enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                out[(i, j)] = e;
                sum += e;
            }
            for j in 0..row.len() {
                out[(i, j)] /= sum;
            }
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    pub fn sigmoid(&self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(out, Op::Sigmoid(x))
    }

    pub fn tanh(&self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    pub fn relu(&self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn log(&self, x: NodeId) -> NodeId {
        let out = self.value(x).mapv(f64::ln);
        self.push(out, Op::Log(x))
    }

    pub fn clamp(&self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let out = self.value(x).mapv(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp(x, lo, hi))
    }

    /// Row-wise `(x - μ)/σ` with `σ = sqrt(var + eps)`; affine scale and
    /// shift are separate `mul_row`/`add_row` ops.
    pub fn layernorm(&self, x: NodeId, eps: f64) -> NodeId {
        let vx = self.value(x);
        let mut out = Array2::zeros(vx.dim());
        for (i, row) in vx.rows().into_iter().enumerate() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = (var + eps).sqrt();
            for (j, &v) in row.iter().enumerate() {
                out[(i, j)] = (v - mean) / sd;
            }
        }
        self.push(out, Op::LayerNorm(x, eps))
    }

    pub fn sum_all(&self, x: NodeId) -> NodeId {
        let s = self.value(x).sum();
        self.push(Array2::from_elem((1, 1), s), Op::SumAll(x))
    }

    /// Embedding lookup: stack `table.row(i)` for each index.
    pub fn gather(&self, table: NodeId, indices: &[usize]) -> NodeId {
        let vt = self.value(table);
        let mut out = Array2::zeros((indices.len(), vt.ncols()));
        for (r, &i) in indices.iter().enumerate() {
            assert!(i < vt.nrows(), "gather index {i} out of range");
            out.row_mut(r).assign(&vt.row(i));
        }
        self.push(out, Op::Gather(table, indices.to_vec()))
    }

    /// Reverse pass from a `1×1` loss node. Gradients accumulate for every
    /// node the loss depends on; the caller reads the ones it cares about.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "loss must be scalar");
        self.backward_from(loss, Array2::from_elem((1, 1), 1.0))
    }

    /// Reverse pass seeded with an upstream gradient for `start`. Used to
    /// stitch tapes together: a value computed on this tape can enter other
    /// tapes as a leaf, and the sum of their leaf gradients flows back in
    /// here.
    pub fn backward_from(&self, start: NodeId, seed: Array2<f64>) -> Gradients {
        assert!(self.recording, "backward on a non-recording tape");
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[start].value.dim(), seed.dim(), "seed matches the start node");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; nodes.len()];
        grads[start] = Some(seed);

        for id in (0..=start).rev() {
            // cloned rather than taken: intermediate gradients stay readable
            let Some(g) = grads[id].clone() else { continue };
            match &nodes[id].op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    accumulate(&mut grads, *a, g.dot(&vb.t()));
                    accumulate(&mut grads, *b, va.t().dot(&g));
                }
                Op::MatmulNT(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    accumulate(&mut grads, *a, g.dot(&**vb));
                    accumulate(&mut grads, *b, g.t().dot(&**va));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, -&g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    accumulate(&mut grads, *a, &g * &**vb);
                    accumulate(&mut grads, *b, &g * &**va);
                }
                Op::AddRow(x, row) => {
                    accumulate(&mut grads, *x, g.clone());
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, gr);
                }
                Op::MulRow(x, row) => {
                    let (vx, vr) = (&nodes[*x].value, &nodes[*row].value);
                    accumulate(&mut grads, *x, &g * &vr.row(0));
                    let gr = (&g * &**vx).sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, gr);
                }
                Op::Scale(x, s) => accumulate(&mut grads, *x, &g * *s),
                Op::AddConst(x) => accumulate(&mut grads, *x, g),
                Op::MulConst(x, c) => accumulate(&mut grads, *x, &g * &**c),
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = nodes[p].value.ncols();
                        accumulate(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = nodes[p].value.nrows();
                        accumulate(&mut grads, p, g.slice(s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                Op::SliceCols(x, start, end) => {
                    let mut gx = Array2::zeros(nodes[*x].value.dim());
                    gx.slice_mut(s![.., *start..*end]).assign(&g);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SliceRows(x, start, end) => {
                    let mut gx = Array2::zeros(nodes[*x].value.dim());
                    gx.slice_mut(s![*start..*end, ..]).assign(&g);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Transpose(x) => accumulate(&mut grads, *x, g.t().to_owned()),
                Op::SoftmaxRows(x) => {
                    let y = &nodes[id].value;
                    let mut gx = Array2::zeros(y.dim());
                    for i in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|j| g[(i, j)] * y[(i, j)]).sum();
                        for j in 0..y.ncols() {
                            gx[(i, j)] = (g[(i, j)] - dot) * y[(i, j)];
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let y = &nodes[id].value;
                    accumulate(&mut grads, *x, &g * &y.mapv(|v| v * (1.0 - v)));
                }
                Op::Tanh(x) => {
                    let y = &nodes[id].value;
                    accumulate(&mut grads, *x, &g * &y.mapv(|v| 1.0 - v * v));
                }
                Op::Relu(x) => {
                    let vx = &nodes[*x].value;
                    accumulate(&mut grads, *x, &g * &vx.mapv(|v| f64::from(u8::from(v > 0.0))));
                }
                Op::Log(x) => {
                    let vx = &nodes[*x].value;
                    accumulate(&mut grads, *x, &g / &**vx);
                }
                Op::Clamp(x, lo, hi) => {
                    let vx = &nodes[*x].value;
                    let pass = vx.mapv(|v| f64::from(u8::from(v > *lo && v < *hi)));
                    accumulate(&mut grads, *x, &g * &pass);
                }
                Op::LayerNorm(x, eps) => {
                    let vx = &nodes[*x].value;
                    let y = &nodes[id].value;
                    let n = vx.ncols() as f64;
                    let mut gx = Array2::zeros(vx.dim());
                    for i in 0..vx.nrows() {
                        let row = vx.row(i);
                        let mean = row.sum() / n;
                        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let sd = (var + eps).sqrt();
                        let g_mean: f64 = (0..vx.ncols()).map(|j| g[(i, j)]).sum::<f64>() / n;
                        let gy_dot: f64 =
                            (0..vx.ncols()).map(|j| g[(i, j)] * y[(i, j)]).sum::<f64>() / n;
                        for j in 0..vx.ncols() {
                            gx[(i, j)] = (g[(i, j)] - g_mean - y[(i, j)] * gy_dot) / sd;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::SumAll(x) => {
                    let shape = nodes[*x].value.dim();
                    accumulate(&mut grads, *x, Array2::from_elem(shape, g[(0, 0)]));
                }
                Op::Gather(table, indices) => {
                    let mut gt = Array2::zeros(nodes[*table].value.dim());
                    for (r, &i) in indices.iter().enumerate() {
                        let mut dst = gt.row_mut(i);
                        dst += &g.row(r);
                    }
                    accumulate(&mut grads, *table, gt);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
    match &mut grads[id] {
        Some(acc) => *acc += &g,
        slot => *slot = Some(g),
    }
}
