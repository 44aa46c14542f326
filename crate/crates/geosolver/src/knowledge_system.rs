//! The knowledge half of the dual-system reasoner.
//!
//! Per reasoning step it (1) scores every knowledge-base entry against the
//! step goal as a multi-label selection head, (2) attends the diagram with
//! the goal, (3) attends the selected knowledge's encoded explanation with
//! the running state, and (4) advances a recurrent knowledge state over the
//! concatenated evidence. The state is recomputed once per step and held
//! fixed while the step's tokens decode.
//!
//! Ablations remove pieces: `NoSelector` drops scoring (and its loss) so the
//! state sees only vision; `NoVisualAttention` drops the diagram attention;
//! `NoKnowledgeState` removes the recurrence entirely, feeding the attention
//! results to the decoder directly.

use ndarray::Array2;
use rand::Rng;

use crate::config::{Ablation, ModelConfig};
use crate::nn::{pooled_attention, Ctx, Linear, LrGroup, LstmCell, ParamStore};
use crate::tape::{NodeId, Tape};

#[derive(Debug, Clone)]
pub struct KnowledgeSystem {
    /// Multi-label selection head over the knowledge base; absent under
    /// `NoSelector`.
    score_head: Option<Linear>,
    /// Maps the pooled problem vector to the initial state; absent under
    /// `NoKnowledgeState`.
    r_init: Option<Linear>,
    state_cell: Option<LstmCell>,
    pub ablation: Ablation,
    pub d: usize,
    pub kb_len: usize,
}

/// Evidence entering one state update. Fields are `None` exactly when the
/// ablation removes their producer.
pub struct StateInputs {
    pub visual: Option<NodeId>,
    pub knowledge: Option<NodeId>,
    pub s_prev: NodeId,
}

impl KnowledgeSystem {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, cfg: &ModelConfig, kb_len: usize) -> Self {
        assert!(kb_len > 0, "knowledge base is never empty");
        let d = cfg.d;
        let ablation = cfg.ablation;
        let score_head = (ablation != Ablation::NoSelector)
            .then(|| Linear::new(store, rng, "ks.score", d, kb_len, LrGroup::Base));
        let has_state = ablation != Ablation::NoKnowledgeState;
        let r_init = has_state.then(|| Linear::new(store, rng, "ks.r_init", d, d, LrGroup::Base));
        let state_cell = has_state.then(|| {
            let input_dim = match ablation {
                Ablation::Full | Ablation::NoGoalDecoder => 3 * d,
                Ablation::NoSelector | Ablation::NoVisualAttention => 2 * d,
                Ablation::NoKnowledgeState => unreachable!(),
            };
            LstmCell::new(store, rng, "ks.state", input_dim, d, LrGroup::Base)
        });
        KnowledgeSystem { score_head, r_init, state_cell, ablation, d, kb_len }
    }

    pub fn has_selector(&self) -> bool {
        self.score_head.is_some()
    }

    pub fn has_state(&self) -> bool {
        self.state_cell.is_some()
    }

    /// Initial state from the pooled problem vector; the cell memory starts
    /// at zero.
    pub fn initial_state(&self, ctx: &Ctx, global: NodeId) -> (NodeId, NodeId) {
        let r_init = self.r_init.as_ref().expect("initial_state without a state cell");
        let r0 = r_init.forward(ctx, global);
        let c0 = ctx.tape.leaf_owned(Array2::zeros((1, self.d)));
        (r0, c0)
    }

    /// Per-entry selection probabilities from the step goal: `sigmoid(W·g)`,
    /// shape `1×N`.
    pub fn score(&self, ctx: &Ctx, goal: NodeId) -> NodeId {
        let head = self.score_head.as_ref().expect("score() under NoSelector");
        ctx.tape.sigmoid(head.forward(ctx, goal))
    }

    /// Goal-driven attention over diagram states: unscaled dot product,
    /// softmax over patches. Returns the pooled vector and the weights.
    pub fn attend_visual(&self, tape: &Tape, goal: NodeId, diagram: NodeId) -> (NodeId, NodeId) {
        pooled_attention(tape, goal, diagram)
    }

    /// Attention over the selected knowledge's encoded explanation tokens.
    /// Queried by the running state, or by the decoder state when the
    /// recurrence is ablated away.
    pub fn attend_knowledge(&self, tape: &Tape, query: NodeId, selected: NodeId) -> (NodeId, NodeId) {
        pooled_attention(tape, query, selected)
    }

    /// Advance the knowledge state over the step's evidence.
    pub fn update(
        &self,
        ctx: &Ctx,
        inputs: StateInputs,
        r_prev: NodeId,
        c_prev: NodeId,
    ) -> (NodeId, NodeId) {
        let cell = self.state_cell.as_ref().expect("update() without a state cell");
        let mut parts = Vec::with_capacity(3);
        match self.ablation {
            Ablation::Full | Ablation::NoGoalDecoder => {
                parts.push(inputs.visual.expect("full model carries visual evidence"));
                parts.push(inputs.knowledge.expect("full model carries knowledge evidence"));
            }
            Ablation::NoSelector => {
                parts.push(inputs.visual.expect("NoSelector still attends the diagram"));
                assert!(inputs.knowledge.is_none(), "NoSelector has no knowledge evidence");
            }
            Ablation::NoVisualAttention => {
                assert!(inputs.visual.is_none(), "NoVisualAttention has no visual evidence");
                parts.push(inputs.knowledge.expect("NoVisualAttention still attends knowledge"));
            }
            Ablation::NoKnowledgeState => unreachable!("update() under NoKnowledgeState"),
        }
        parts.push(inputs.s_prev);
        let x = ctx.tape.concat_cols(&parts);
        cell.forward(ctx, x, r_prev, c_prev)
    }
}

/// Threshold selection over scored probabilities: strictly above `threshold`
/// selects; if nothing clears it, the single best entry is used (ties go to
/// the lowest id).
pub fn select_entries(probs: &Array2<f64>, threshold: f64) -> Vec<usize> {
    assert_eq!(probs.nrows(), 1, "probabilities are a 1×N row");
    let n = probs.ncols();
    let selected: Vec<usize> = (0..n).filter(|&j| probs[(0, j)] > threshold).collect();
    if !selected.is_empty() {
        return selected;
    }
    let mut best = 0;
    for j in 1..n {
        if probs[(0, j)] > probs[(0, best)] {
            best = j;
        }
    }
    vec![best]
}
