//! The dual-system loop: teacher-forced training forward, beam-search
//! decoding, and the answer protocol.
//!
//! Both systems alternate per reasoning step. At a step boundary the goal
//! decoder proposes a goal from the decoder-state history, the knowledge
//! system scores and selects entries, attends diagram and knowledge, and
//! advances its state `r`; then the token decoder emits that step's tokens
//! with `r` held fixed. Teacher forcing walks gold tokens on a recording
//! tape for the losses; decoding expands hypotheses on throwaway tapes,
//! each hypothesis carrying its own full state.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Ablation;
use crate::data::EncodedProblem;
use crate::inference_system::{LegalityTracker, StepEvidence};
use crate::knowledge_system::{select_entries, StateInputs};
use crate::model::Model;
use crate::nn::Ctx;
use crate::perception::PerceptionError;
use crate::program::{NumberMap, Program, ProgramVocabulary, TokenId};
use crate::tape::{NodeId, Tape, Value};

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("problem has {labels} knowledge label sets for {steps} program steps")]
    LabelMismatch { steps: usize, labels: usize },
    #[error("gold program has {tokens} tokens, decode budget is {max}")]
    ProgramTooLong { tokens: usize, max: usize },
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// Which knowledge enters the per-step selected memory. Training uses the
/// gold labels; metrics that probe deployment behavior use predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgePolicy {
    Gold,
    Predicted,
}

/// Per-step record of what the reasoner saw and chose.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepTrace {
    /// Selection probabilities over the knowledge base; absent without the
    /// selection head.
    pub scores: Option<Vec<f64>>,
    /// Knowledge entries whose explanations entered the step (sorted).
    pub selected: Vec<usize>,
    /// This step's tokens, including the trailing SEP or EOS.
    pub tokens: Vec<TokenId>,
    /// Log-probability of each of this step's tokens.
    pub token_logprobs: Vec<f64>,
    /// Snapshot of the knowledge state at every token position of the step;
    /// the architecture holds it constant within a step.
    pub r_per_token: Option<Vec<Vec<f64>>>,
    /// Diagram attention weights (per patch); absent when vision is ablated.
    pub visual_weights: Option<Vec<f64>>,
    /// Selected-knowledge attention weights (per explanation token).
    pub knowledge_weights: Option<Vec<f64>>,
    /// Memory attention weights at each token position (per memory row).
    pub context_weights: Vec<Vec<f64>>,
}

/// Everything needed to replay one pass deterministically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReasonerTrace {
    pub steps: Vec<StepTrace>,
    pub tokens: Vec<TokenId>,
    pub token_logprobs: Vec<f64>,
}

/// Output of the teacher-forced forward pass, with graph nodes for the
/// losses still attached to the caller's tape.
#[derive(Debug)]
pub struct TeacherForcedOutput {
    /// One distribution (`1×|V_P|`) per gold token position.
    pub token_dists: Vec<NodeId>,
    /// One score row (`1×N`) per step; empty without the selection head.
    pub step_scores: Vec<NodeId>,
    pub trace: ReasonerTrace,
}

/// One ranked decode result. `program` is `None` when the token sequence
/// does not parse (possible only with the legality mask off).
#[derive(Debug, Clone)]
pub struct DecodedProgram {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub program: Option<Program>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Answer {
    Choice {
        index: usize,
        value: f64,
        /// 0-based rank of the first program that executed and matched.
        rank: usize,
        score: f64,
        program_text: String,
    },
    NoResult,
}

/// Evidence computed at one step boundary, valid for every token of the
/// step.
struct StepContext {
    scores: Option<NodeId>,
    selected: Vec<usize>,
    /// Knowledge state (state-bearing variants).
    state: Option<NodeId>,
    /// Direct evidence when the state is ablated away.
    knowledge_direct: Option<NodeId>,
    visual_direct: Option<NodeId>,
    visual_weights: Option<NodeId>,
    knowledge_weights: Option<NodeId>,
}

/// Run one step boundary: goal, selection, attention, state update.
/// `states` is the decoder-state history `[s_0..s_cur]`; `r_c` is the
/// previous knowledge state and its cell memory.
#[allow(clippy::too_many_arguments)]
fn run_boundary(
    model: &Model,
    ctx: &Ctx,
    memory: NodeId,
    diagram: NodeId,
    states: &[NodeId],
    s_cur: NodeId,
    r_c: Option<(NodeId, NodeId)>,
    gold: Option<&[usize]>,
    threshold: f64,
) -> Result<(StepContext, Option<(NodeId, NodeId)>), ReasonerError> {
    let t = ctx.tape;
    let inf = &model.inference_system;
    let ks = &model.knowledge_system;

    let goal = if inf.has_goal_decoder() { inf.next_goal(ctx, states, memory) } else { s_cur };

    let scores = ks.has_selector().then(|| ks.score(ctx, goal));
    let selected: Vec<usize> = match (&scores, gold) {
        (None, _) => Vec::new(),
        (Some(_), Some(ids)) if !ids.is_empty() => {
            let mut ids = ids.to_vec();
            ids.sort_unstable();
            ids.dedup();
            ids
        }
        // no gold provided (or an empty label set): fall back to the
        // thresholded prediction, which is never empty
        (Some(p), _) => select_entries(&t.value(*p), threshold),
    };
    let selected_memory = if selected.is_empty() {
        None
    } else {
        Some(model.encode_selected_knowledge(ctx, &selected)?)
    };

    let mut step = StepContext {
        scores,
        selected,
        state: None,
        knowledge_direct: None,
        visual_direct: None,
        visual_weights: None,
        knowledge_weights: None,
    };

    let next_rc = match ks.ablation {
        Ablation::Full | Ablation::NoGoalDecoder => {
            let (r_prev, c_prev) = r_c.expect("state-bearing variant carries r");
            let (h_vis, vw) = ks.attend_visual(t, goal, diagram);
            let selected_memory = selected_memory.expect("full model always selects knowledge");
            let (h_know, kw) = ks.attend_knowledge(t, r_prev, selected_memory);
            let (r, c) = ks.update(
                ctx,
                StateInputs { visual: Some(h_vis), knowledge: Some(h_know), s_prev: s_cur },
                r_prev,
                c_prev,
            );
            step.state = Some(r);
            step.visual_weights = Some(vw);
            step.knowledge_weights = Some(kw);
            Some((r, c))
        }
        Ablation::NoSelector => {
            let (r_prev, c_prev) = r_c.expect("NoSelector still carries r");
            let (h_vis, vw) = ks.attend_visual(t, goal, diagram);
            let (r, c) = ks.update(
                ctx,
                StateInputs { visual: Some(h_vis), knowledge: None, s_prev: s_cur },
                r_prev,
                c_prev,
            );
            step.state = Some(r);
            step.visual_weights = Some(vw);
            Some((r, c))
        }
        Ablation::NoVisualAttention => {
            let (r_prev, c_prev) = r_c.expect("NoVisualAttention still carries r");
            let selected_memory = selected_memory.expect("selection head present");
            let (h_know, kw) = ks.attend_knowledge(t, r_prev, selected_memory);
            let (r, c) = ks.update(
                ctx,
                StateInputs { visual: None, knowledge: Some(h_know), s_prev: s_cur },
                r_prev,
                c_prev,
            );
            step.state = Some(r);
            step.knowledge_weights = Some(kw);
            Some((r, c))
        }
        Ablation::NoKnowledgeState => {
            assert!(r_c.is_none());
            let (h_vis, vw) = ks.attend_visual(t, goal, diagram);
            let selected_memory = selected_memory.expect("selection head present");
            let (h_know, kw) = ks.attend_knowledge(t, s_cur, selected_memory);
            step.knowledge_direct = Some(h_know);
            step.visual_direct = Some(h_vis);
            step.visual_weights = Some(vw);
            step.knowledge_weights = Some(kw);
            None
        }
    };
    Ok((step, next_rc))
}

/// Advance the decoder by one token position: context attention with the
/// previous state, recurrent update, masked output distribution.
fn token_step(
    model: &Model,
    ctx: &Ctx,
    memory: NodeId,
    step: &StepContext,
    e_prev: NodeId,
    s: NodeId,
    c_s: NodeId,
    mask: Option<&Array2<f64>>,
) -> (NodeId, NodeId, NodeId, NodeId) {
    let inf = &model.inference_system;
    let (h_c, cw) = inf.attend_context(ctx.tape, s, memory);
    let evidence = StepEvidence {
        context: h_c,
        state: step.state,
        knowledge: step.knowledge_direct,
        visual: step.visual_direct,
        prev_embed: e_prev,
    };
    let (s_next, c_next) = inf.decode_step(ctx, evidence, s, c_s);
    let dist = inf.token_distribution(ctx, s_next, mask);
    (s_next, c_next, dist, cw)
}

/// Teacher-forced pass over the gold program, on the caller's (recording)
/// tape. Knowledge entering the selected memory follows `policy`; gold
/// labels always feed the selection loss. With scheduled sampling, each
/// step independently swaps gold for predicted selection with probability
/// `sched_sample`.
pub fn forward_teacher_forced(
    model: &Model,
    ctx: &Ctx,
    enc: &EncodedProblem,
    policy: KnowledgePolicy,
    mut sched: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<TeacherForcedOutput, ReasonerError> {
    let t = ctx.tape;
    let cfg = &model.cfg;
    let vocab = &model.program_vocab;

    let groups = enc.program.step_token_groups(vocab);
    if groups.len() != enc.knowledge.len() {
        return Err(ReasonerError::LabelMismatch { steps: groups.len(), labels: enc.knowledge.len() });
    }
    if enc.program.tokens.len() > cfg.decode.max_tokens {
        return Err(ReasonerError::ProgramTooLong {
            tokens: enc.program.tokens.len(),
            max: cfg.decode.max_tokens,
        });
    }

    let encoded = model.perception.encode(ctx, &enc.text_ids, &enc.patches)?;
    let inf = &model.inference_system;
    let ks = &model.knowledge_system;

    let (mut s, mut c_s) = inf.initial_state(ctx, encoded.global);
    let mut r_c = ks.has_state().then(|| ks.initial_state(ctx, encoded.global));
    let mut states = vec![s];
    let mut e_prev = inf.embed_token(ctx, vocab.bos_id());
    let mut tracker = LegalityTracker::new(
        vocab,
        enc.numbers.values.len(),
        cfg.decode.max_tokens,
        cfg.decode.max_steps,
    );

    let mut token_dists = Vec::with_capacity(enc.program.tokens.len());
    let mut step_scores = Vec::new();
    let mut trace = ReasonerTrace { steps: Vec::new(), tokens: Vec::new(), token_logprobs: Vec::new() };

    for (k, group) in groups.iter().enumerate() {
        let use_gold = match policy {
            KnowledgePolicy::Predicted => false,
            KnowledgePolicy::Gold => match &mut sched {
                Some((p, rng)) => !rng.random_bool(*p),
                None => true,
            },
        };
        let gold = use_gold.then(|| enc.knowledge[k].as_slice());
        let (step, next_rc) = run_boundary(
            model,
            ctx,
            encoded.memory,
            encoded.diagram,
            &states,
            s,
            r_c,
            gold,
            cfg.model.threshold,
        )?;
        r_c = next_rc;
        if let Some(p) = step.scores {
            step_scores.push(p);
        }

        let mut st = StepTrace {
            scores: step.scores.map(|p| t.value(p).iter().copied().collect()),
            selected: step.selected.clone(),
            tokens: group.clone(),
            token_logprobs: Vec::with_capacity(group.len()),
            r_per_token: step.state.map(|_| Vec::with_capacity(group.len())),
            visual_weights: step.visual_weights.map(|w| t.value(w).iter().copied().collect()),
            knowledge_weights: step.knowledge_weights.map(|w| t.value(w).iter().copied().collect()),
            context_weights: Vec::with_capacity(group.len()),
        };

        for &y in group {
            let mask = cfg.model.legality_mask.then(|| tracker.mask());
            let (s_next, c_next, dist, cw) =
                token_step(model, ctx, encoded.memory, &step, e_prev, s, c_s, mask.as_ref());
            s = s_next;
            c_s = c_next;
            states.push(s);
            let lp = t.value(dist)[(0, y)].ln();
            token_dists.push(dist);
            st.token_logprobs.push(lp);
            st.context_weights.push(t.value(cw).iter().copied().collect());
            if let (Some(snaps), Some(r)) = (&mut st.r_per_token, step.state) {
                snaps.push(t.value(r).iter().copied().collect());
            }
            trace.tokens.push(y);
            trace.token_logprobs.push(lp);
            e_prev = inf.embed_token(ctx, y);
            tracker.advance(y);
        }
        trace.steps.push(st);
    }

    Ok(TeacherForcedOutput { token_dists, step_scores, trace })
}

/// Problem encodings shared by every hypothesis of a decode.
struct DecodeShared {
    memory: Value,
    diagram: Value,
}

/// Full per-stream state of one decoding hypothesis. Cloning is cheap
/// (shared array storage) and isolates streams completely.
#[derive(Clone)]
struct StreamState<'v> {
    s: Value,
    c_s: Value,
    r: Option<Value>,
    c_r: Option<Value>,
    knowledge_direct: Option<Value>,
    visual_direct: Option<Value>,
    history: Vec<Value>,
    e_prev: Value,
    tracker: LegalityTracker<'v>,
    needs_boundary: bool,
    /// Boundary records, populated only when tracing.
    steps: Vec<StepTrace>,
}

impl<'v> StreamState<'v> {
    fn new(model: &'v Model, enc: &EncodedProblem) -> Result<(Self, DecodeShared), ReasonerError> {
        let tape = Tape::new(false);
        let ctx = Ctx::new(&tape, &model.store);
        let encoded = model.perception.encode(&ctx, &enc.text_ids, &enc.patches)?;
        let (s0, c0) = model.inference_system.initial_state(&ctx, encoded.global);
        let r_c = model
            .knowledge_system
            .has_state()
            .then(|| model.knowledge_system.initial_state(&ctx, encoded.global));
        let e_prev = model.inference_system.embed_token(&ctx, model.program_vocab.bos_id());
        let state = StreamState {
            s: tape.value(s0),
            c_s: tape.value(c0),
            r: r_c.map(|(r, _)| tape.value(r)),
            c_r: r_c.map(|(_, c)| tape.value(c)),
            knowledge_direct: None,
            visual_direct: None,
            history: vec![tape.value(s0)],
            e_prev: tape.value(e_prev),
            tracker: LegalityTracker::new(
                &model.program_vocab,
                enc.numbers.values.len(),
                model.cfg.decode.max_tokens,
                model.cfg.decode.max_steps,
            ),
            needs_boundary: true,
            steps: Vec::new(),
        };
        let shared = DecodeShared { memory: tape.value(encoded.memory), diagram: tape.value(encoded.diagram) };
        Ok((state, shared))
    }

    /// Advance to the next token position and return its distribution. The
    /// state update is token-independent, so children forked from this
    /// stream share it.
    fn step(
        &mut self,
        model: &Model,
        shared: &DecodeShared,
        collect: bool,
    ) -> Result<Array2<f64>, ReasonerError> {
        let tape = Tape::new(false);
        let ctx = Ctx::new(&tape, &model.store);
        let memory = tape.leaf(shared.memory.clone());

        if self.needs_boundary {
            let diagram = tape.leaf(shared.diagram.clone());
            let states: Vec<NodeId> = self.history.iter().map(|v| tape.leaf(v.clone())).collect();
            let s_cur = *states.last().expect("history starts with s_0");
            let r_c = self.r.as_ref().map(|r| {
                (tape.leaf(r.clone()), tape.leaf(self.c_r.clone().expect("cell accompanies r")))
            });
            let (step, next_rc) = run_boundary(
                model,
                &ctx,
                memory,
                diagram,
                &states,
                s_cur,
                r_c,
                None,
                model.cfg.model.threshold,
            )?;
            self.r = next_rc.map(|(r, _)| tape.value(r));
            self.c_r = next_rc.map(|(_, c)| tape.value(c));
            self.knowledge_direct = step.knowledge_direct.map(|n| tape.value(n));
            self.visual_direct = step.visual_direct.map(|n| tape.value(n));
            self.needs_boundary = false;
            if collect {
                self.steps.push(StepTrace {
                    scores: step.scores.map(|p| tape.value(p).iter().copied().collect()),
                    selected: step.selected,
                    tokens: Vec::new(),
                    token_logprobs: Vec::new(),
                    r_per_token: self.r.as_ref().map(|_| Vec::new()),
                    visual_weights: step.visual_weights.map(|w| tape.value(w).iter().copied().collect()),
                    knowledge_weights: step
                        .knowledge_weights
                        .map(|w| tape.value(w).iter().copied().collect()),
                    context_weights: Vec::new(),
                });
            }
        }

        let step = StepContext {
            scores: None,
            selected: Vec::new(),
            state: self.r.as_ref().map(|v| tape.leaf(v.clone())),
            knowledge_direct: self.knowledge_direct.as_ref().map(|v| tape.leaf(v.clone())),
            visual_direct: self.visual_direct.as_ref().map(|v| tape.leaf(v.clone())),
            visual_weights: None,
            knowledge_weights: None,
        };
        let s = tape.leaf(self.s.clone());
        let c_s = tape.leaf(self.c_s.clone());
        let e_prev = tape.leaf(self.e_prev.clone());
        let mask = model.cfg.model.legality_mask.then(|| self.tracker.mask());
        let (s_next, c_next, dist, cw) =
            token_step(model, &ctx, memory, &step, e_prev, s, c_s, mask.as_ref());
        self.s = tape.value(s_next);
        self.c_s = tape.value(c_next);
        self.history.push(tape.value(s_next));
        if collect {
            if let (Some(st), Some(r)) = (self.steps.last_mut(), &self.r) {
                st.context_weights.push(tape.value(cw).iter().copied().collect());
                if let Some(snaps) = &mut st.r_per_token {
                    snaps.push(r.iter().copied().collect());
                }
            } else if let Some(st) = self.steps.last_mut() {
                st.context_weights.push(tape.value(cw).iter().copied().collect());
            }
        }
        Ok((*tape.value(dist)).clone())
    }

    /// Record the chosen token.
    fn commit(&mut self, model: &Model, token: TokenId, logprob: f64, collect: bool) {
        let embed = model.store.value(
            model.store.id("inf.embed").expect("decoder embedding exists"),
        );
        self.e_prev = std::sync::Arc::new(
            embed.row(token).to_owned().insert_axis(ndarray::Axis(0)),
        );
        if model.cfg.model.legality_mask {
            self.tracker.advance(token);
        } else {
            self.tracker.advance_unchecked(token);
        }
        if collect {
            if let Some(st) = self.steps.last_mut() {
                st.tokens.push(token);
                st.token_logprobs.push(logprob);
            }
        }
        // the next step's boundary work happens lazily before its first token
        if !self.tracker.is_finished() && self.tracker.at_step_start() {
            self.needs_boundary = true;
        }
    }
}

/// Candidate ordering: score descending, then shorter first, then token
/// sequence ascending. Total and deterministic.
fn rank_key(score: f64, tokens: &[TokenId]) -> (std::cmp::Reverse<ordered::F64>, usize, Vec<TokenId>) {
    (std::cmp::Reverse(ordered::F64(score)), tokens.len(), tokens.to_vec())
}

/// Minimal total order over non-NaN floats for deterministic ranking.
mod ordered {
    #[derive(PartialEq, Clone, Copy, Debug)]
    pub struct F64(pub f64);
    impl Eq for F64 {}
    #[allow(clippy::derive_ord_xor_partial_ord)]
    impl PartialOrd for F64 {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for F64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.partial_cmp(&other.0).expect("decode scores are never NaN")
        }
    }
}

struct Hypothesis<'v> {
    stream: StreamState<'v>,
    tokens: Vec<TokenId>,
    score: f64,
    finished: bool,
}

/// Beam search over program tokens. Hypotheses finalize at EOS; the end
/// token is forced at the last position so every hypothesis terminates.
/// Results are sorted by cumulative log-probability descending (no length
/// normalization).
pub fn beam_decode(
    model: &Model,
    enc: &EncodedProblem,
    beam: usize,
) -> Result<Vec<DecodedProgram>, ReasonerError> {
    assert!(beam > 0, "beam width is positive");
    let (stream, shared) = StreamState::new(model, enc)?;
    let mut pool = vec![Hypothesis { stream, tokens: Vec::new(), score: 0.0, finished: false }];
    let max_tokens = model.cfg.decode.max_tokens;
    let eos = model.program_vocab.eos_id();

    for pos in 0..max_tokens {
        if pool.iter().all(|h| h.finished) {
            break;
        }
        // candidate = (parent index, extension token, its log-prob, score)
        let mut candidates: Vec<(usize, Option<(TokenId, f64)>, f64, Vec<TokenId>)> = Vec::new();
        let mut dists: Vec<Option<Array2<f64>>> = Vec::with_capacity(pool.len());
        for hyp in pool.iter_mut() {
            if hyp.finished {
                dists.push(None);
            } else {
                dists.push(Some(hyp.stream.step(model, &shared, false)?));
            }
        }
        for (i, hyp) in pool.iter().enumerate() {
            if hyp.finished {
                candidates.push((i, None, hyp.score, hyp.tokens.clone()));
                continue;
            }
            let dist = dists[i].as_ref().expect("unfinished hypotheses stepped");
            let last_slot = pos + 1 == max_tokens;
            for token in 0..dist.ncols() {
                if last_slot && token != eos {
                    continue;
                }
                let p = dist[(0, token)];
                if p <= 0.0 {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(token);
                candidates.push((i, Some((token, p.ln())), hyp.score + p.ln(), tokens));
            }
        }
        candidates.sort_by(|a, b| rank_key(a.2, &a.3).cmp(&rank_key(b.2, &b.3)));
        candidates.truncate(beam);

        let mut next = Vec::with_capacity(candidates.len());
        for (parent, ext, score, tokens) in candidates {
            match ext {
                None => next.push(Hypothesis {
                    stream: pool[parent].stream.clone(),
                    tokens,
                    score,
                    finished: true,
                }),
                Some((token, lp)) => {
                    let mut stream = pool[parent].stream.clone();
                    stream.commit(model, token, lp, false);
                    let finished = token == eos;
                    next.push(Hypothesis { stream, tokens, score, finished });
                }
            }
        }
        pool = next;
    }

    pool.sort_by(|a, b| rank_key(a.score, &a.tokens).cmp(&rank_key(b.score, &b.tokens)));
    Ok(pool
        .into_iter()
        .map(|h| DecodedProgram {
            program: model.program_vocab.from_tokens(&h.tokens).ok(),
            tokens: h.tokens,
            score: h.score,
        })
        .collect())
}

/// Cumulative log-probability of a fixed token sequence under inference
/// semantics (predicted knowledge). Shares the per-position code with
/// [`beam_decode`], so scores agree bitwise. Returns `-inf` when a token is
/// masked out. With `collect` the full trace is returned.
pub fn score_sequence(
    model: &Model,
    enc: &EncodedProblem,
    tokens: &[TokenId],
    collect: bool,
) -> Result<(f64, Option<ReasonerTrace>), ReasonerError> {
    let (mut stream, shared) = StreamState::new(model, enc)?;
    let mut score = 0.0;
    let mut logprobs = Vec::with_capacity(tokens.len());
    for &token in tokens {
        let dist = stream.step(model, &shared, collect)?;
        let p = dist[(0, token)];
        if p <= 0.0 {
            return Ok((f64::NEG_INFINITY, None));
        }
        score += p.ln();
        logprobs.push(p.ln());
        stream.commit(model, token, p.ln(), collect);
    }
    let trace = collect.then(|| ReasonerTrace {
        steps: stream.steps,
        tokens: tokens.to_vec(),
        token_logprobs: logprobs,
    });
    Ok((score, trace))
}

/// The answer protocol: execute ranked programs in order, return the first
/// that executes and matches a choice.
pub fn answer(
    vocab: &ProgramVocabulary,
    numbers: &NumberMap,
    choices: &[f64; 4],
    ranked: &[DecodedProgram],
) -> Answer {
    for (rank, cand) in ranked.iter().enumerate() {
        let Some(program) = &cand.program else { continue };
        let Ok(result) = vocab.execute(program, numbers) else { continue };
        if let Some(index) = vocab.match_choice(result.final_value, choices) {
            return Answer::Choice {
                index,
                value: result.final_value,
                rank,
                score: cand.score,
                program_text: vocab.render(program),
            };
        }
    }
    Answer::NoResult
}
