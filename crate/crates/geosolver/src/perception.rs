//! Multimodal perception: text encoding, diagram encoding, cross-modal
//! fusion.
//!
//! The text encoder runs two branches over shared word embeddings: a
//! bidirectional recurrent pass (half the width per direction) and a
//! position-aware transformer stack standing in for a pretrained contextual
//! model. Their concatenation is projected back to width `d`. Knowledge
//! explanations go through the same encoder with mean pooling, so textual
//! knowledge and problem text live in one space.
//!
//! The diagram encoder projects flattened patches to `d` and refines them
//! with transformer layers. Fusion interleaves text self-attention with
//! text-guided cross-attention into the diagram states; the joint memory is
//! the original text states stacked on the fused diagram states, reduced to a
//! single problem vector by a learned attention pool.

use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

use crate::config::ModelConfig;
use crate::nn::{
    gaussian, Ctx, EncoderLayer, FeedForward, LayerNorm, Linear, LrGroup, LstmCell,
    MultiHeadAttention, ParamId, ParamStore,
};
use crate::tape::{NodeId, Tape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("text has {len} tokens, the encoder supports {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("text is empty")]
    EmptyText,
    #[error("diagram patches are {got_rows}×{got_cols}, expected {want_rows}×{want_cols}")]
    PatchShape { got_rows: usize, got_cols: usize, want_rows: usize, want_cols: usize },
}

/// One fusion block: the text stream self-attends, then the diagram stream
/// self-attends, queries the text, and feeds forward. Pre-norm throughout.
#[derive(Debug, Clone)]
pub struct CoAttentionBlock {
    t_ln1: LayerNorm,
    t_sa: MultiHeadAttention,
    t_ln2: LayerNorm,
    t_ff: FeedForward,
    d_ln1: LayerNorm,
    d_sa: MultiHeadAttention,
    d_ln2: LayerNorm,
    d_ca: MultiHeadAttention,
    d_ln3: LayerNorm,
    d_ff: FeedForward,
}

impl CoAttentionBlock {
    fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, d: usize, heads: usize) -> Self {
        let g = LrGroup::FusionGoal;
        CoAttentionBlock {
            t_ln1: LayerNorm::new(store, &format!("{name}.t_ln1"), d, g),
            t_sa: MultiHeadAttention::new(store, rng, &format!("{name}.t_sa"), d, heads, g),
            t_ln2: LayerNorm::new(store, &format!("{name}.t_ln2"), d, g),
            t_ff: FeedForward::new(store, rng, &format!("{name}.t_ff"), d, g),
            d_ln1: LayerNorm::new(store, &format!("{name}.d_ln1"), d, g),
            d_sa: MultiHeadAttention::new(store, rng, &format!("{name}.d_sa"), d, heads, g),
            d_ln2: LayerNorm::new(store, &format!("{name}.d_ln2"), d, g),
            d_ca: MultiHeadAttention::new(store, rng, &format!("{name}.d_ca"), d, heads, g),
            d_ln3: LayerNorm::new(store, &format!("{name}.d_ln3"), d, g),
            d_ff: FeedForward::new(store, rng, &format!("{name}.d_ff"), d, g),
        }
    }

    fn forward(&self, ctx: &Ctx, text: NodeId, diagram: NodeId) -> (NodeId, NodeId) {
        let t = ctx.tape;
        let tq = self.t_ln1.forward(ctx, text);
        let text = t.add(text, self.t_sa.forward(ctx, tq, tq, None));
        let text = t.add(text, self.t_ff.forward(ctx, self.t_ln2.forward(ctx, text)));

        let dq = self.d_ln1.forward(ctx, diagram);
        let diagram = t.add(diagram, self.d_sa.forward(ctx, dq, dq, None));
        let cq = self.d_ln2.forward(ctx, diagram);
        let diagram = t.add(diagram, self.d_ca.forward(ctx, cq, text, None));
        let diagram = t.add(diagram, self.d_ff.forward(ctx, self.d_ln3.forward(ctx, diagram)));
        (text, diagram)
    }
}

/// Everything downstream modules need from one encoded problem.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// Text states `n×d` (pre-fusion; these rows join the joint memory).
    pub text: NodeId,
    /// Fused diagram states `P×d`.
    pub diagram: NodeId,
    /// Joint memory: text rows stacked on fused diagram rows, `(n+P)×d`.
    pub memory: NodeId,
    /// Pooled problem vector `1×d`.
    pub global: NodeId,
    pub n_text: usize,
    pub n_patches: usize,
}

#[derive(Debug, Clone)]
pub struct Perception {
    text_embed: ParamId,
    text_pos: ParamId,
    lstm_fwd: LstmCell,
    lstm_bwd: LstmCell,
    ctx_layers: Vec<EncoderLayer>,
    ctx_final_ln: LayerNorm,
    text_merge: Linear,
    patch_proj: Linear,
    diag_pos: ParamId,
    diag_layers: Vec<EncoderLayer>,
    blocks: Vec<CoAttentionBlock>,
    reduce_score: Linear,
    reduce_out: Linear,
    global_proj: Linear,
    pub max_text_len: usize,
    pub n_patches: usize,
    pub patch_dim: usize,
    pub d: usize,
}

impl Perception {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        cfg: &ModelConfig,
        text_vocab_size: usize,
    ) -> Self {
        let d = cfg.d;
        let grid = cfg.image_size / cfg.patch_size;
        let n_patches = grid * grid;
        let patch_dim = cfg.patch_size * cfg.patch_size;

        let text_embed = store.add("text.embed", gaussian(rng, text_vocab_size, d, 0.1), LrGroup::Base);
        let text_pos = store.add("text.pos", gaussian(rng, cfg.max_text_len, d, 0.02), LrGroup::Base);
        let lstm_fwd = LstmCell::new(store, rng, "text.lstm_fwd", d, d / 2, LrGroup::Base);
        let lstm_bwd = LstmCell::new(store, rng, "text.lstm_bwd", d, d / 2, LrGroup::Base);
        let ctx_layers = (0..cfg.text_layers)
            .map(|i| EncoderLayer::new(store, rng, &format!("text.ctx{i}"), d, cfg.heads, LrGroup::ContextualText))
            .collect();
        let ctx_final_ln = LayerNorm::new(store, "text.ctx_final_ln", d, LrGroup::ContextualText);
        let text_merge = Linear::new(store, rng, "text.merge", 2 * d, d, LrGroup::Base);

        let patch_proj = Linear::new(store, rng, "diag.patch_proj", patch_dim, d, LrGroup::Base);
        let diag_pos = store.add("diag.pos", gaussian(rng, n_patches, d, 0.02), LrGroup::Base);
        let diag_layers = (0..2)
            .map(|i| EncoderLayer::new(store, rng, &format!("diag.enc{i}"), d, cfg.heads, LrGroup::Base))
            .collect();

        let blocks = (0..cfg.fusion_blocks)
            .map(|i| CoAttentionBlock::new(store, rng, &format!("fuse.block{i}"), d, cfg.heads))
            .collect();
        let reduce_score = Linear::new(store, rng, "fuse.reduce_score", d, d, LrGroup::FusionGoal);
        let reduce_out = Linear::new_no_bias(store, rng, "fuse.reduce_out", d, 1, LrGroup::FusionGoal);
        let global_proj = Linear::new(store, rng, "fuse.global", 2 * d, d, LrGroup::FusionGoal);

        Perception {
            text_embed,
            text_pos,
            lstm_fwd,
            lstm_bwd,
            ctx_layers,
            ctx_final_ln,
            text_merge,
            patch_proj,
            diag_pos,
            diag_layers,
            blocks,
            reduce_score,
            reduce_out,
            global_proj,
            max_text_len: cfg.max_text_len,
            n_patches,
            patch_dim,
            d,
        }
    }

    /// Encode a token sequence to `n×d` states.
    pub fn encode_text(&self, ctx: &Ctx, ids: &[usize]) -> Result<NodeId, PerceptionError> {
        let n = ids.len();
        if n == 0 {
            return Err(PerceptionError::EmptyText);
        }
        if n > self.max_text_len {
            return Err(PerceptionError::SequenceTooLong { len: n, max: self.max_text_len });
        }
        let t = ctx.tape;
        let embedded = t.gather(ctx.param(self.text_embed), ids);

        // recurrent branch: d/2 forward plus d/2 backward per position
        let mut fwd_states = Vec::with_capacity(n);
        let (mut h, mut c) = self.lstm_fwd.zero_state(t);
        for i in 0..n {
            let x = t.slice_rows(embedded, i, i + 1);
            let (nh, nc) = self.lstm_fwd.forward(ctx, x, h, c);
            fwd_states.push(nh);
            h = nh;
            c = nc;
        }
        let mut bwd_states = vec![0; n];
        let (mut h, mut c) = self.lstm_bwd.zero_state(t);
        for i in (0..n).rev() {
            let x = t.slice_rows(embedded, i, i + 1);
            let (nh, nc) = self.lstm_bwd.forward(ctx, x, h, c);
            bwd_states[i] = nh;
            h = nh;
            c = nc;
        }
        let fwd = t.concat_rows(&fwd_states);
        let bwd = t.concat_rows(&bwd_states);
        let recurrent = t.concat_cols(&[fwd, bwd]);

        // contextual branch: position-aware transformer stack
        let pos = t.slice_rows(ctx.param(self.text_pos), 0, n);
        let mut x = t.add(embedded, pos);
        for layer in &self.ctx_layers {
            x = layer.forward(ctx, x, None);
        }
        let contextual = self.ctx_final_ln.forward(ctx, x);

        Ok(self.text_merge.forward(ctx, t.concat_cols(&[recurrent, contextual])))
    }

    /// Encode diagram patches (`P×patch²`, values in `[0,1]`) to `P×d`.
    pub fn encode_diagram(&self, ctx: &Ctx, patches: &Array2<f64>) -> Result<NodeId, PerceptionError> {
        if patches.dim() != (self.n_patches, self.patch_dim) {
            return Err(PerceptionError::PatchShape {
                got_rows: patches.nrows(),
                got_cols: patches.ncols(),
                want_rows: self.n_patches,
                want_cols: self.patch_dim,
            });
        }
        let t = ctx.tape;
        let x = t.leaf_owned(patches.clone());
        let mut x = t.add(self.patch_proj.forward(ctx, x), ctx.param(self.diag_pos));
        for layer in &self.diag_layers {
            x = layer.forward(ctx, x, None);
        }
        Ok(x)
    }

    /// Full pipeline: encode both modalities, fuse, pool.
    pub fn encode(
        &self,
        ctx: &Ctx,
        text_ids: &[usize],
        patches: &Array2<f64>,
    ) -> Result<Encoded, PerceptionError> {
        let t = ctx.tape;
        let text = self.encode_text(ctx, text_ids)?;
        let diagram0 = self.encode_diagram(ctx, patches)?;

        let (mut ft, mut fd) = (text, diagram0);
        for block in &self.blocks {
            let (nt, nd) = block.forward(ctx, ft, fd);
            ft = nt;
            fd = nd;
        }
        // joint memory keeps the unfused text rows; fusion refines only the
        // diagram side, text served as the guide
        let memory = t.concat_rows(&[text, fd]);

        let scores = self.reduce_out.forward(ctx, t.tanh(self.reduce_score.forward(ctx, memory)));
        let weights = t.softmax_rows(t.transpose(scores));
        let reduced = t.matmul(weights, memory);
        let n = text_ids.len();
        let last_text = t.slice_rows(text, n - 1, n);
        let global = self.global_proj.forward(ctx, t.concat_cols(&[reduced, last_text]));

        Ok(Encoded {
            text,
            diagram: fd,
            memory,
            global,
            n_text: n,
            n_patches: self.n_patches,
        })
    }
}

/// Mean over the rows of an `n×d` node, as a `1×d` node.
pub fn mean_rows(tape: &Tape, x: NodeId, n: usize) -> NodeId {
    let ones = Array2::from_elem((1, n), 1.0 / n as f64);
    tape.matmul(tape.leaf_owned(ones), x)
}
