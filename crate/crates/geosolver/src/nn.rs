//! Parameter storage and reusable network blocks built on the tape.
//!
//! Parameters live in a [`ParamStore`], each tagged with the learning-rate
//! group the optimizer applies. Layers hold parameter ids, never values; a
//! [`Ctx`] binds each parameter to exactly one tape leaf per forward pass, so
//! a layer applied twice contributes one accumulated gradient per parameter
//! instead of two competing leaves.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

use crate::tape::{NodeId, Tape, Value};

/// Optimizer learning-rate group. Every parameter belongs to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LrGroup {
    /// The contextual half of the text encoder (lowest rate, it plays the
    /// role of a pretrained language model).
    ContextualText,
    /// Cross-modal fusion and the goal decoder.
    FusionGoal,
    /// Everything else: embeddings, recurrent cells, output heads.
    Base,
}

pub type ParamId = usize;

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub value: Value,
    pub group: LrGroup,
    pub frozen: bool,
}

/// Named, ordered collection of all trainable matrices.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Array2<f64>, group: LrGroup) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "parameter `{name}` registered twice"
        );
        let id = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value: Arc::new(value),
            group,
            frozen: false,
        });
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn value(&self, id: ParamId) -> Value {
        Arc::clone(&self.entries[id].value)
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn set_value(&mut self, id: ParamId, value: Array2<f64>) {
        assert_eq!(self.entries[id].value.dim(), value.dim(), "shape change for {}", self.entries[id].name);
        self.entries[id].value = Arc::new(value);
    }

    /// In-place mutable access for the optimizer; copies only if the Arc is
    /// shared (it is not during a normal step).
    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        Arc::make_mut(&mut self.entries[id].value)
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.entries[id].frozen = frozen;
    }

    /// Freeze every parameter whose name starts with `prefix`; returns how
    /// many matched.
    pub fn freeze_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for e in &mut self.entries {
            if e.name.starts_with(prefix) {
                e.frozen = true;
                n += 1;
            }
        }
        n
    }

    pub fn total_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// Binds parameters to tape leaves, one leaf per parameter per tape.
pub struct Ctx<'t> {
    pub tape: &'t Tape,
    pub store: &'t ParamStore,
    bound: RefCell<HashMap<ParamId, NodeId>>,
}

impl<'t> Ctx<'t> {
    pub fn new(tape: &'t Tape, store: &'t ParamStore) -> Self {
        Ctx { tape, store, bound: RefCell::new(HashMap::new()) }
    }

    pub fn param(&self, id: ParamId) -> NodeId {
        if let Some(&node) = self.bound.borrow().get(&id) {
            return node;
        }
        let node = self.tape.leaf(self.store.value(id));
        self.bound.borrow_mut().insert(id, node);
        node
    }

    /// All parameters this pass touched, with their tape nodes.
    pub fn bound_params(&self) -> Vec<(ParamId, NodeId)> {
        let mut v: Vec<(ParamId, NodeId)> = self.bound.borrow().iter().map(|(&p, &n)| (p, n)).collect();
        v.sort_unstable();
        v
    }
}

/// Standard normal via Box–Muller, so initialization needs nothing beyond a
/// uniform source.
pub fn normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * std
}

pub fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| normal(rng, std))
}

/// Additive causal mask: zero on and below the diagonal, `-1e30` above.
pub fn causal_mask(n: usize) -> Value {
    Arc::new(Array2::from_shape_fn((n, n), |(i, j)| if j > i { -1e30 } else { 0.0 }))
}

/// `x · W + b`, weights `in×out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d_in: usize,
        d_out: usize,
        group: LrGroup,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), xavier(rng, d_in, d_out), group);
        let b = store.add(&format!("{name}.b"), Array2::zeros((1, d_out)), group);
        Linear { w, b: Some(b) }
    }

    pub fn new_no_bias<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d_in: usize,
        d_out: usize,
        group: LrGroup,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), xavier(rng, d_in, d_out), group);
        Linear { w, b: None }
    }

    pub fn forward(&self, ctx: &Ctx, x: NodeId) -> NodeId {
        let y = ctx.tape.matmul(x, ctx.param(self.w));
        match self.b {
            Some(b) => ctx.tape.add_row(y, ctx.param(b)),
            None => y,
        }
    }
}

/// Row-wise layer norm with learned scale and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, group: LrGroup) -> Self {
        let gamma = store.add(&format!("{name}.gamma"), Array2::ones((1, d)), group);
        let beta = store.add(&format!("{name}.beta"), Array2::zeros((1, d)), group);
        LayerNorm { gamma, beta, eps: 1e-5 }
    }

    pub fn forward(&self, ctx: &Ctx, x: NodeId) -> NodeId {
        let n = ctx.tape.layernorm(x, self.eps);
        ctx.tape.add_row(ctx.tape.mul_row(n, ctx.param(self.gamma)), ctx.param(self.beta))
    }
}

/// Single LSTM cell over row-vector states. Gate order `[i, f, g, o]`;
/// the forget-gate bias starts at 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d_in: usize,
        hidden: usize,
        group: LrGroup,
    ) -> Self {
        let w = store.add(&format!("{name}.w"), xavier(rng, d_in + hidden, 4 * hidden), group);
        let mut bias = Array2::zeros((1, 4 * hidden));
        bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        let b = store.add(&format!("{name}.b"), bias, group);
        LstmCell { w, b, hidden }
    }

    /// `(x 1×in, h 1×hid, c 1×hid) → (h' 1×hid, c' 1×hid)`
    pub fn forward(&self, ctx: &Ctx, x: NodeId, h: NodeId, c: NodeId) -> (NodeId, NodeId) {
        let t = ctx.tape;
        let xs = t.concat_cols(&[x, h]);
        let gates = t.add_row(t.matmul(xs, ctx.param(self.w)), ctx.param(self.b));
        let hd = self.hidden;
        let i = t.sigmoid(t.slice_cols(gates, 0, hd));
        let f = t.sigmoid(t.slice_cols(gates, hd, 2 * hd));
        let g = t.tanh(t.slice_cols(gates, 2 * hd, 3 * hd));
        let o = t.sigmoid(t.slice_cols(gates, 3 * hd, 4 * hd));
        let c_next = t.add(t.mul(f, c), t.mul(i, g));
        let h_next = t.mul(o, t.tanh(c_next));
        (h_next, c_next)
    }

    pub fn zero_state(&self, tape: &Tape) -> (NodeId, NodeId) {
        let h = tape.leaf_owned(Array2::zeros((1, self.hidden)));
        let c = tape.leaf_owned(Array2::zeros((1, self.hidden)));
        (h, c)
    }
}

/// Multi-head scaled dot-product attention (`n×d` queries over `m×d`
/// memory). Mask, when given, is added to every head's scores.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub d: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        heads: usize,
        group: LrGroup,
    ) -> Self {
        assert_eq!(d % heads, 0, "head count must divide the model width");
        MultiHeadAttention {
            wq: Linear::new(store, rng, &format!("{name}.wq"), d, d, group),
            wk: Linear::new(store, rng, &format!("{name}.wk"), d, d, group),
            wv: Linear::new(store, rng, &format!("{name}.wv"), d, d, group),
            wo: Linear::new(store, rng, &format!("{name}.wo"), d, d, group),
            heads,
            d,
        }
    }

    pub fn forward(&self, ctx: &Ctx, q_in: NodeId, kv_in: NodeId, mask: Option<&Value>) -> NodeId {
        let t = ctx.tape;
        let q = self.wq.forward(ctx, q_in);
        let k = self.wk.forward(ctx, kv_in);
        let v = self.wv.forward(ctx, kv_in);
        let dh = self.d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut head_outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = t.slice_cols(q, lo, hi);
            let kh = t.slice_cols(k, lo, hi);
            let vh = t.slice_cols(v, lo, hi);
            let mut scores = t.scale(t.matmul_nt(qh, kh), scale);
            if let Some(m) = mask {
                scores = t.add_const(scores, Arc::clone(m));
            }
            let w = t.softmax_rows(scores);
            head_outs.push(t.matmul(w, vh));
        }
        let cat = t.concat_cols(&head_outs);
        self.wo.forward(ctx, cat)
    }
}

/// Position-wise feed-forward, expansion factor 4.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub lin1: Linear,
    pub lin2: Linear,
}

impl FeedForward {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, d: usize, group: LrGroup) -> Self {
        FeedForward {
            lin1: Linear::new(store, rng, &format!("{name}.ff1"), d, 4 * d, group),
            lin2: Linear::new(store, rng, &format!("{name}.ff2"), 4 * d, d, group),
        }
    }

    pub fn forward(&self, ctx: &Ctx, x: NodeId) -> NodeId {
        self.lin2.forward(ctx, ctx.tape.relu(self.lin1.forward(ctx, x)))
    }
}

/// Pre-norm transformer encoder layer: self-attention then feed-forward,
/// each behind a residual.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub ff: FeedForward,
}

impl EncoderLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        heads: usize,
        group: LrGroup,
    ) -> Self {
        EncoderLayer {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d, group),
            attn: MultiHeadAttention::new(store, rng, &format!("{name}.attn"), d, heads, group),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d, group),
            ff: FeedForward::new(store, rng, &format!("{name}.ff"), d, group),
        }
    }

    pub fn forward(&self, ctx: &Ctx, x: NodeId, mask: Option<&Value>) -> NodeId {
        let t = ctx.tape;
        let a = self.attn.forward(ctx, self.ln1.forward(ctx, x), self.ln1.forward(ctx, x), mask);
        let x = t.add(x, a);
        let f = self.ff.forward(ctx, self.ln2.forward(ctx, x));
        t.add(x, f)
    }
}

/// Pre-norm transformer decoder layer: causal self-attention, cross-attention
/// into an encoder memory, feed-forward; residuals around each.
#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub ln1: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln3: LayerNorm,
    pub ff: FeedForward,
}

impl DecoderLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        heads: usize,
        group: LrGroup,
    ) -> Self {
        DecoderLayer {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), d, group),
            self_attn: MultiHeadAttention::new(store, rng, &format!("{name}.self"), d, heads, group),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), d, group),
            cross_attn: MultiHeadAttention::new(store, rng, &format!("{name}.cross"), d, heads, group),
            ln3: LayerNorm::new(store, &format!("{name}.ln3"), d, group),
            ff: FeedForward::new(store, rng, &format!("{name}.ff"), d, group),
        }
    }

    pub fn forward(&self, ctx: &Ctx, x: NodeId, memory: NodeId, self_mask: Option<&Value>) -> NodeId {
        let t = ctx.tape;
        let q = self.ln1.forward(ctx, x);
        let a = self.self_attn.forward(ctx, q, q, self_mask);
        let x = t.add(x, a);
        let c = self.cross_attn.forward(ctx, self.ln2.forward(ctx, x), memory, None);
        let x = t.add(x, c);
        let f = self.ff.forward(ctx, self.ln3.forward(ctx, x));
        t.add(x, f)
    }
}

/// Unscaled single-query attention over a memory: `softmax(q · Mᵀ) · M`.
/// Returns the pooled `1×d` vector and the `1×m` weights.
pub fn pooled_attention(tape: &Tape, query: NodeId, memory: NodeId) -> (NodeId, NodeId) {
    let scores = tape.matmul_nt(query, memory);
    let weights = tape.softmax_rows(scores);
    let pooled = tape.matmul(weights, memory);
    (pooled, weights)
}
