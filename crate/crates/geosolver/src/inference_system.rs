//! The inference half of the dual-system reasoner: token decoding, goal
//! generation and grammar masking.
//!
//! A recurrent decoder emits program tokens one at a time. Its per-token
//! evidence is the memory context (attention over the joint memory with the
//! previous decoder state), the current knowledge state, and the previous
//! token's embedding. At every step boundary a small transformer decoder
//! reads the full history of decoder states against the joint memory and
//! produces the next step's goal vector, which drives the knowledge system.
//!
//! The legality tracker walks the program grammar alongside decoding and
//! offers an additive mask: `0` for tokens that keep the sequence
//! well-formed, `-1e30` for the rest. At least one token is always legal.

use ndarray::Array2;
use rand::Rng;

use crate::config::{Ablation, ModelConfig};
use crate::nn::{
    causal_mask, gaussian, pooled_attention, Ctx, DecoderLayer, LayerNorm, Linear, LrGroup,
    LstmCell, ParamId, ParamStore,
};
use crate::program::{ProgramVocabulary, Token, TokenId};
use crate::tape::{NodeId, Tape};

#[derive(Debug, Clone)]
pub struct InferenceSystem {
    embed: ParamId,
    s_init: Linear,
    step_cell: LstmCell,
    out_proj: Linear,
    goal_layers: Vec<DecoderLayer>,
    goal_pos: Option<ParamId>,
    goal_final_ln: Option<LayerNorm>,
    pub d: usize,
    pub vocab_size: usize,
    pub ablation: Ablation,
}

/// Evidence entering one decoder step. `state` is the knowledge state;
/// under `NoKnowledgeState` the raw attention results take its place.
pub struct StepEvidence {
    pub context: NodeId,
    pub state: Option<NodeId>,
    pub knowledge: Option<NodeId>,
    pub visual: Option<NodeId>,
    pub prev_embed: NodeId,
}

impl InferenceSystem {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        cfg: &ModelConfig,
        vocab_size: usize,
        max_tokens: usize,
    ) -> Self {
        let d = cfg.d;
        let mut embed_init = gaussian(rng, vocab_size, d, 0.1);
        // padding convention: PAD embeds to the zero vector
        embed_init.row_mut(0).fill(0.0);
        let embed = store.add("inf.embed", embed_init, LrGroup::Base);
        let s_init = Linear::new(store, rng, "inf.s_init", d, d, LrGroup::Base);
        let input_dim = match cfg.ablation {
            Ablation::NoKnowledgeState => 4 * d,
            _ => 3 * d,
        };
        let step_cell = LstmCell::new(store, rng, "inf.step", input_dim, d, LrGroup::Base);
        let out_proj = Linear::new(store, rng, "inf.out", d, vocab_size, LrGroup::Base);

        let has_goal = cfg.ablation != Ablation::NoGoalDecoder;
        let goal_layers = if has_goal {
            (0..cfg.goal_layers)
                .map(|i| DecoderLayer::new(store, rng, &format!("inf.goal{i}"), d, cfg.heads, LrGroup::FusionGoal))
                .collect()
        } else {
            Vec::new()
        };
        let goal_pos = has_goal.then(|| {
            // one position per decoder state: s_0 plus one per emitted token
            store.add("inf.goal_pos", gaussian(rng, max_tokens + 1, d, 0.02), LrGroup::FusionGoal)
        });
        let goal_final_ln = has_goal.then(|| LayerNorm::new(store, "inf.goal_final_ln", d, LrGroup::FusionGoal));

        InferenceSystem {
            embed,
            s_init,
            step_cell,
            out_proj,
            goal_layers,
            goal_pos,
            goal_final_ln,
            d,
            vocab_size,
            ablation: cfg.ablation,
        }
    }

    pub fn has_goal_decoder(&self) -> bool {
        !self.goal_layers.is_empty()
    }

    /// Initial decoder state from the pooled problem vector; cell memory
    /// starts at zero.
    pub fn initial_state(&self, ctx: &Ctx, global: NodeId) -> (NodeId, NodeId) {
        let s0 = self.s_init.forward(ctx, global);
        let c0 = ctx.tape.leaf_owned(Array2::zeros((1, self.d)));
        (s0, c0)
    }

    pub fn embed_token(&self, ctx: &Ctx, token: TokenId) -> NodeId {
        ctx.tape.gather(ctx.param(self.embed), &[token])
    }

    /// Attention over the joint memory with the previous decoder state as
    /// query (unscaled dot product).
    pub fn attend_context(&self, tape: &Tape, s_prev: NodeId, memory: NodeId) -> (NodeId, NodeId) {
        pooled_attention(tape, s_prev, memory)
    }

    /// One decoder step: advance `(s, c)` over the step evidence.
    pub fn decode_step(
        &self,
        ctx: &Ctx,
        evidence: StepEvidence,
        s_prev: NodeId,
        c_prev: NodeId,
    ) -> (NodeId, NodeId) {
        let mut parts = vec![evidence.context];
        match self.ablation {
            Ablation::NoKnowledgeState => {
                parts.push(evidence.knowledge.expect("NoKnowledgeState feeds knowledge directly"));
                parts.push(evidence.visual.expect("NoKnowledgeState feeds vision directly"));
                assert!(evidence.state.is_none());
            }
            _ => {
                parts.push(evidence.state.expect("state-bearing variants feed the knowledge state"));
                assert!(evidence.knowledge.is_none() && evidence.visual.is_none());
            }
        }
        parts.push(evidence.prev_embed);
        let x = ctx.tape.concat_cols(&parts);
        self.step_cell.forward(ctx, x, s_prev, c_prev)
    }

    /// Token distribution from a decoder state. The additive mask (if any)
    /// zeroes illegal tokens exactly.
    pub fn token_distribution(&self, ctx: &Ctx, s: NodeId, mask: Option<&Array2<f64>>) -> NodeId {
        let t = ctx.tape;
        let mut logits = self.out_proj.forward(ctx, s);
        if let Some(m) = mask {
            assert_eq!(m.dim(), (1, self.vocab_size), "mask covers the whole vocabulary");
            logits = t.add_const(logits, std::sync::Arc::new(m.clone()));
        }
        t.softmax_rows(logits)
    }

    /// All positions of the goal decoder over the decoder-state history:
    /// masked self-attention over the history, cross-attention into the
    /// joint memory. Causality makes row `k` independent of rows after `k`.
    pub fn goal_rows(&self, ctx: &Ctx, states: &[NodeId], memory: NodeId) -> NodeId {
        assert!(self.has_goal_decoder(), "goal decoder absent under NoGoalDecoder");
        assert!(!states.is_empty());
        let t = ctx.tape;
        let seq = t.concat_rows(states);
        let n = states.len();
        let pos = t.slice_rows(ctx.param(self.goal_pos.expect("goal decoder has positions")), 0, n);
        let mut x = t.add(seq, pos);
        let mask = causal_mask(n);
        for layer in &self.goal_layers {
            x = layer.forward(ctx, x, memory, Some(&mask));
        }
        self.goal_final_ln.as_ref().expect("goal decoder has a final norm").forward(ctx, x)
    }

    /// Next step's goal: the final row of [`goal_rows`](Self::goal_rows)
    /// (`states` is `s_0` plus one state per emitted token, in order).
    pub fn next_goal(&self, ctx: &Ctx, states: &[NodeId], memory: NodeId) -> NodeId {
        let x = self.goal_rows(ctx, states, memory);
        ctx.tape.slice_rows(x, states.len() - 1, states.len())
    }
}

/// What the grammar expects next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    /// Start of a step: an operator.
    Operator,
    /// `n` more arguments of the current operator.
    Args(usize),
    /// Step complete: a separator or the end token.
    Boundary,
    Finished,
}

/// Walks the program grammar during decoding and yields the legality mask
/// for every position.
#[derive(Debug, Clone)]
pub struct LegalityTracker<'v> {
    vocab: &'v ProgramVocabulary,
    n_numbers: usize,
    expect: Expect,
    steps_completed: usize,
    tokens_emitted: usize,
    max_tokens: usize,
    max_steps: usize,
}

impl<'v> LegalityTracker<'v> {
    pub fn new(
        vocab: &'v ProgramVocabulary,
        n_numbers: usize,
        max_tokens: usize,
        max_steps: usize,
    ) -> Self {
        assert!(max_tokens >= 2, "room for at least one operator and EOS");
        LegalityTracker {
            vocab,
            n_numbers: n_numbers.min(vocab.max_problem_numbers()),
            expect: Expect::Operator,
            steps_completed: 0,
            tokens_emitted: 0,
            max_tokens,
            max_steps: max_steps.min(vocab.max_variables()),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.expect == Expect::Finished
    }

    pub fn tokens_emitted(&self) -> usize {
        self.tokens_emitted
    }

    /// True when the grammar allows `token` here.
    pub fn is_legal(&self, token: TokenId) -> bool {
        // the final slot is reserved: everything still open must end now
        if self.tokens_emitted + 1 >= self.max_tokens {
            return token == self.vocab.eos_id();
        }
        match self.expect {
            Expect::Finished => false,
            Expect::Operator => matches!(self.vocab.kind(token), Token::Op(_)),
            Expect::Args(_) => match self.vocab.kind(token) {
                Token::Const(_) => true,
                Token::Number(i) => i < self.n_numbers,
                Token::Var(j) => j < self.steps_completed,
                _ => false,
            },
            Expect::Boundary => {
                // the step behind us counts: SEP would open step
                // `steps_completed + 2` (1-based), which must still fit
                token == self.vocab.eos_id()
                    || (token == self.vocab.sep_id() && self.steps_completed + 1 < self.max_steps)
            }
        }
    }

    /// Additive mask over the vocabulary: `0` legal, `-1e30` illegal.
    pub fn mask(&self) -> Array2<f64> {
        let mut m = Array2::from_elem((1, self.vocab.len()), -1e30);
        let mut any = false;
        for id in 0..self.vocab.len() {
            if self.is_legal(id) {
                m[(0, id)] = 0.0;
                any = true;
            }
        }
        assert!(any, "legality mask always leaves an option open");
        m
    }

    /// Record an emitted token. Panics on tokens the mask forbids; decoding
    /// and teacher forcing both respect the mask first.
    pub fn advance(&mut self, token: TokenId) {
        assert!(self.is_legal(token), "token `{}` is illegal here", self.vocab.name_of(token));
        self.advance_unchecked(token);
    }

    /// Record an emitted token without legality checks, for decoding with
    /// the grammar mask disabled. SEP and EOS keep their structural meaning;
    /// any other token fills whatever slot is open.
    pub fn advance_unchecked(&mut self, token: TokenId) {
        self.tokens_emitted += 1;
        if token == self.vocab.eos_id() {
            self.expect = Expect::Finished;
            return;
        }
        if token == self.vocab.sep_id() {
            self.steps_completed += 1;
            self.expect = Expect::Operator;
            return;
        }
        self.expect = match (self.expect, self.vocab.kind(token)) {
            (Expect::Operator | Expect::Boundary | Expect::Finished, Token::Op(i)) => {
                let arity = self.vocab.operators()[i].arity;
                if arity == 0 {
                    Expect::Boundary
                } else {
                    Expect::Args(arity)
                }
            }
            (Expect::Args(1), _) => Expect::Boundary,
            (Expect::Args(n), _) => Expect::Args(n - 1),
            // unmasked decoders may emit junk; keep the slot open
            (state, _) => state,
        };
    }

    /// Whether the sequence sits at a step boundary (the next legal tokens
    /// are SEP/EOS were already consumed and an operator comes next).
    pub fn at_step_start(&self) -> bool {
        self.expect == Expect::Operator
    }
}
