//! Metrics and studies: answer accuracy by category, NoResult rate,
//! per-step operator and whole-step accuracy, threshold sweeps, and the
//! ablation table.
//!
//! Answer accuracy decodes freely with the beam and runs the answer
//! protocol. The step metrics instead walk gold prefixes (teacher forcing)
//! with predicted knowledge selection, so they isolate one decision at a
//! time: OP asks whether the operator token is ranked first, whole-step
//! accuracy whether every token of the step is. A step's trailing
//! separator is bookkeeping, not content, and is excluded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{Ablation, Config};
use crate::data::{Category, EncodedProblem};
use crate::knowledge::KnowledgeBase;
use crate::model::Model;
use crate::nn::Ctx;
use crate::program::{ProgramVocabulary, TokenId};
use crate::reasoner::{
    answer, beam_decode, forward_teacher_forced, Answer, KnowledgePolicy, ReasonerError,
};
use crate::tape::Tape;
use crate::training::{self, TrainError, TrainOptions};

/// Outcome of one problem: the decode answer plus step-metric counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub id: String,
    pub category: Category,
    pub answer: Answer,
    pub correct: bool,
    /// Gold steps whose operator token ranked first.
    pub op_correct: usize,
    /// Gold steps with every content token ranked first.
    pub step_correct: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub problems: usize,
    pub correct: usize,
    pub total_accuracy: f64,
    /// Keyed by category label; totals sum to `problems`.
    pub categories: BTreeMap<String, CategoryAccuracy>,
    pub no_result: usize,
    pub no_result_rate: f64,
    pub op_correct: usize,
    pub step_count: usize,
    pub op_accuracy: f64,
    pub absolute_correct: usize,
    pub absolute_accuracy: f64,
    pub outcomes: Vec<ProblemOutcome>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-step correctness under teacher-forced gold prefixes with predicted
/// knowledge selection. Returns (operator-correct, fully-correct, steps).
fn step_metrics(model: &Model, enc: &EncodedProblem) -> Result<(usize, usize, usize), ReasonerError> {
    let tape = Tape::new(false);
    let ctx = Ctx::new(&tape, &model.store);
    let out = forward_teacher_forced(model, &ctx, enc, KnowledgePolicy::Predicted, None)?;
    let groups = enc.program.step_token_groups(&model.program_vocab);

    let argmax = |dist: &ndarray::Array2<f64>| -> TokenId {
        let mut best = 0;
        for t in 1..dist.ncols() {
            if dist[(0, t)] > dist[(0, best)] {
                best = t;
            }
        }
        best
    };

    let mut pos = 0;
    let mut op_ok = 0;
    let mut abs_ok = 0;
    for group in &groups {
        // the group's last token is the step boundary (SEP or EOS)
        let content = &group[..group.len() - 1];
        let hits: Vec<bool> = content
            .iter()
            .enumerate()
            .map(|(off, &gold)| argmax(&tape.value(out.token_dists[pos + off])) == gold)
            .collect();
        op_ok += usize::from(hits[0]);
        abs_ok += usize::from(hits.iter().all(|&h| h));
        pos += group.len();
    }
    Ok((op_ok, abs_ok, groups.len()))
}

fn solve_one(model: &Model, enc: &EncodedProblem) -> Result<ProblemOutcome, ReasonerError> {
    let ranked = beam_decode(model, enc, model.cfg.decode.beam)?;
    let ans = answer(&model.program_vocab, &enc.numbers, &enc.choices, &ranked);
    let correct = matches!(ans, Answer::Choice { index, .. } if index == enc.answer_index);
    let (op_correct, step_correct, steps) = step_metrics(model, enc)?;
    Ok(ProblemOutcome {
        id: enc.id.clone(),
        category: enc.category,
        answer: ans,
        correct,
        op_correct,
        step_correct,
        steps,
    })
}

/// Decode and grade every problem. Per-problem work is independent and
/// runs on `decode.workers` threads; outcomes keep corpus order, so the
/// report is identical at any width.
pub fn evaluate(model: &Model, problems: &[EncodedProblem]) -> Result<EvalReport, ReasonerError> {
    let workers = model.cfg.decode.workers.max(1);
    let outcomes: Vec<ProblemOutcome> = if workers == 1 || problems.len() < 2 {
        problems.iter().map(|p| solve_one(model, p)).collect::<Result<_, _>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool construction");
        pool.install(|| {
            problems.par_iter().map(|p| solve_one(model, p)).collect::<Result<Vec<_>, _>>()
        })?
    };
    Ok(summarize(outcomes))
}

/// Aggregate an outcome list into the report. Pure counting; the tests
/// recount independently.
pub fn summarize(outcomes: Vec<ProblemOutcome>) -> EvalReport {
    let problems = outcomes.len();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let no_result = outcomes.iter().filter(|o| o.answer == Answer::NoResult).count();
    let op_correct: usize = outcomes.iter().map(|o| o.op_correct).sum();
    let absolute_correct: usize = outcomes.iter().map(|o| o.step_correct).sum();
    let step_count: usize = outcomes.iter().map(|o| o.steps).sum();

    let mut categories: BTreeMap<String, CategoryAccuracy> = BTreeMap::new();
    for o in &outcomes {
        let slot = categories.entry(o.category.label().to_string()).or_insert(CategoryAccuracy {
            total: 0,
            correct: 0,
            accuracy: 0.0,
        });
        slot.total += 1;
        slot.correct += usize::from(o.correct);
    }
    for slot in categories.values_mut() {
        slot.accuracy = ratio(slot.correct, slot.total);
    }

    EvalReport {
        problems,
        correct,
        total_accuracy: ratio(correct, problems),
        categories,
        no_result,
        no_result_rate: ratio(no_result, problems),
        op_correct,
        step_count,
        op_accuracy: ratio(op_correct, step_count),
        absolute_correct,
        absolute_accuracy: ratio(absolute_correct, step_count),
        outcomes,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub total_accuracy: f64,
    pub no_result_rate: f64,
    pub op_accuracy: f64,
    pub absolute_accuracy: f64,
}

/// Evaluate at several knowledge-selection thresholds. The model's
/// configured threshold is restored afterwards.
pub fn threshold_sweep(
    model: &mut Model,
    problems: &[EncodedProblem],
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>, ReasonerError> {
    let original = model.cfg.model.threshold;
    let mut points = Vec::with_capacity(thresholds.len());
    for &theta in thresholds {
        model.cfg.model.threshold = theta;
        let report = evaluate(model, problems);
        if report.is_err() {
            model.cfg.model.threshold = original;
        }
        let report = report?;
        points.push(SweepPoint {
            threshold: theta,
            total_accuracy: report.total_accuracy,
            no_result_rate: report.no_result_rate,
            op_accuracy: report.op_accuracy,
            absolute_accuracy: report.absolute_accuracy,
        });
    }
    model.cfg.model.threshold = original;
    Ok(points)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub ablation: Ablation,
    pub parameters: usize,
    pub report: EvalReport,
}

/// Train and evaluate every architectural variant under the base config
/// (identical seeds, data, and schedule), mirroring a controlled study.
pub fn ablate(
    base: &Config,
    program_vocab: &ProgramVocabulary,
    text_vocab: &crate::data::text::TextVocab,
    kb: &KnowledgeBase,
    train_set: &[EncodedProblem],
    eval_set: &[EncodedProblem],
) -> Result<Vec<AblationRow>, TrainError> {
    let mut rows = Vec::with_capacity(Ablation::ALL.len());
    for ablation in Ablation::ALL {
        let mut cfg = base.clone();
        cfg.model.ablation = ablation;
        let mut model = Model::new(cfg, program_vocab.clone(), text_vocab.clone(), kb.clone());
        training::train(&mut model, train_set, &[], &TrainOptions::default())?;
        let report = evaluate(&model, eval_set)?;
        rows.push(AblationRow { ablation, parameters: model.store.total_scalars(), report });
    }
    Ok(rows)
}
