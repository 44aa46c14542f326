//! Command-line entry point: corpus synthesis, training, evaluation,
//! studies, and single-program utilities.
//!
//! Configuration is layered: built-in defaults, then an optional flat
//! `key = value` file, then `--set key=value` overrides. Every run
//! directory receives the resolved snapshot, so any artifact names the
//! exact configuration that produced it. Exit codes: 0 success, 2 usage,
//! 3 invalid input (corpus, config, checkpoint), 4 non-finite loss.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::Config;
use crate::data::{self, build_text_vocab, encode_corpus, Corpus, EncodedProblem};
use crate::evaluation::{self, EvalReport};
use crate::knowledge::KnowledgeBase;
use crate::model::Model;
use crate::program::{NumberMap, ProgramVocabulary};
use crate::reasoner::{answer, beam_decode, score_sequence, Answer};
use crate::training::{self, TrainError, TrainOptions};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::NonFinite { .. } => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { epoch, batch } => CliError::NonFinite { epoch, batch },
            TrainError::State(msg) => CliError::Validation(msg),
            other => CliError::Other(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "geosolver",
    version,
    about = "Step-wise neural program generation for diagrammed multiple-choice geometry problems",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus (one subdirectory per split).
    Synth {
        /// Output directory; defaults to $GEO_HOME/corpus.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Problems per split.
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Comma-separated split names.
        #[arg(long, default_value = "train,val,test")]
        splits: String,
        #[arg(long, default_value_t = 64)]
        image_size: usize,
    },
    /// Train a model on a corpus directory containing train/ (and val/).
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Run directory; defaults to $GEO_HOME/runs/run-<seed>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flat `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a single key, e.g. --set model.d=64 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Shorthand for --set train.workers=N.
        #[arg(long)]
        workers: Option<usize>,
        /// Continue from the run directory's optimizer state.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a checkpoint on one corpus split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Write the full report as JSON here (stdout shows a summary).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Shorthand for --set decode.workers=N.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train and evaluate every architecture variant under one config.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Evaluation split for the variant table.
        #[arg(long, default_value = "test")]
        split: String,
        /// Write the table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-evaluate a checkpoint across knowledge-selection thresholds.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Comma-separated thresholds in (0,1).
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        thresholds: String,
        /// Write the curve as tab-separated columns here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Execute a program text against problem numbers and print the result.
    Exec {
        /// File holding the program text, e.g. `Minus C_3 N_0 ; Half V_0`.
        #[arg(long, conflicts_with = "program_text")]
        program: Option<PathBuf>,
        /// Program text given inline.
        #[arg(long)]
        program_text: Option<String>,
        /// Comma-separated values for N_0, N_1, ...
        #[arg(long, default_value = "")]
        numbers: String,
        /// Optional four comma-separated answer choices to match against.
        #[arg(long)]
        choices: Option<String>,
    },
    /// Decode one problem and dump the full reasoning trace as JSON.
    Trace {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Problem id within the split.
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run with explicit arguments and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version to stdout (exit 0) and usage errors
            // to stderr (exit 2)
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Synth { out, count, seed, splits, image_size } => {
            synth(out, count, seed, &splits, image_size)
        }
        Cmd::Train { data, out, config, set, workers, resume } => {
            train(&data, out, config.as_deref(), &set, workers, resume)
        }
        Cmd::Eval { checkpoint, data, split, out, set, workers } => {
            eval(&checkpoint, &data, &split, out.as_deref(), &set, workers)
        }
        Cmd::Ablate { data, split, out, config, set, workers } => {
            ablate(&data, &split, out.as_deref(), config.as_deref(), &set, workers)
        }
        Cmd::Sweep { checkpoint, data, split, thresholds, out, workers } => {
            sweep(&checkpoint, &data, &split, &thresholds, out.as_deref(), workers)
        }
        Cmd::Exec { program, program_text, numbers, choices } => {
            exec(program.as_deref(), program_text.as_deref(), &numbers, choices.as_deref())
        }
        Cmd::Trace { checkpoint, data, split, id, out } => {
            trace(&checkpoint, &data, &split, &id, out.as_deref())
        }
    }
}

/// Default artifact location under GEO_HOME when --out is omitted.
fn default_out(kind: &str, leaf: &str) -> Result<PathBuf, CliError> {
    match std::env::var_os("GEO_HOME") {
        Some(home) => Ok(PathBuf::from(home).join(kind).join(leaf)),
        None => Err(CliError::Usage(format!(
            "pass --out or set GEO_HOME for a default {kind} location"
        ))),
    }
}

fn parse_f64_list(raw: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--{flag}: `{s}` is not a number")))
        })
        .collect()
}

fn resolve_config(
    file: Option<&Path>,
    set: &[String],
    workers: Option<(&str, usize)>,
) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    if let Some(path) = file {
        cfg.apply_file(path).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    cfg.apply_overrides(set.iter().map(|s| s.as_str()))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some((key, n)) = workers {
        cfg.set(key, &n.to_string()).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(cfg)
}

fn load_split(dir: &Path, split: &str) -> Result<Corpus, CliError> {
    Corpus::load(&dir.join(split)).map_err(|e| CliError::Validation(e.to_string()))
}

/// Load, validate, and encode one split against a model's vocabularies.
fn load_problems(model: &Model, data: &Path, split: &str) -> Result<Vec<EncodedProblem>, CliError> {
    let corpus = load_split(data, split)?;
    let report = corpus.validate(&model.program_vocab, &model.kb, &model.text_vocab);
    if !report.clean() {
        return Err(validation_issues(split, &report));
    }
    encode_corpus(
        &corpus,
        &model.text_vocab,
        &model.program_vocab,
        model.cfg.model.image_size,
        model.cfg.model.patch_size,
    )
    .map_err(|e| CliError::Validation(e.to_string()))
}

fn validation_issues(split: &str, report: &data::ValidationReport) -> CliError {
    let mut msg = format!("split `{split}` failed validation ({} issues):", report.issues.len());
    for issue in report.issues.iter().take(10) {
        msg.push_str(&format!("\n  {}: {}", issue.problem_id, issue.issue));
    }
    if report.issues.len() > 10 {
        msg.push_str(&format!("\n  ... and {} more", report.issues.len() - 10));
    }
    CliError::Validation(msg)
}

fn synth(out: Option<PathBuf>, count: usize, seed: u64, splits: &str, image_size: usize) -> Result<(), CliError> {
    let out = match out {
        Some(p) => p,
        None => default_out("corpus", &format!("synth-{seed}"))?,
    };
    let names: Vec<&str> = splits.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(CliError::Usage("--splits names at least one split".into()));
    }
    let kb = KnowledgeBase::sample();
    for name in names {
        let dir = data::synthesize_corpus(&out, name, count, seed, image_size, &kb)
            .map_err(|e| CliError::Other(e.to_string()))?;
        let corpus = Corpus::load(&dir).map_err(|e| CliError::Other(e.to_string()))?;
        let digest = corpus.digest().map_err(|e| CliError::Other(e.to_string()))?;
        println!("{name}: {} problems, digest {digest}", corpus.problems.len());
    }
    println!("corpus written to {}", out.display());
    Ok(())
}

fn train(
    data: &Path,
    out: Option<PathBuf>,
    config: Option<&Path>,
    set: &[String],
    workers: Option<usize>,
    resume: bool,
) -> Result<(), CliError> {
    let cfg = resolve_config(config, set, workers.map(|n| ("train.workers", n)))?;
    let out = match out {
        Some(p) => p,
        None => default_out("runs", &format!("run-{}", cfg.train.seed))?,
    };

    let kb = KnowledgeBase::sample();
    let program_vocab = ProgramVocabulary::default();
    let corpus = load_split(data, "train")?;
    let text_vocab = build_text_vocab(&corpus, &kb, cfg.model.max_numbers);
    let report = corpus.validate(&program_vocab, &kb, &text_vocab);
    if !report.clean() {
        return Err(validation_issues("train", &report));
    }
    let train_set = encode_corpus(&corpus, &text_vocab, &program_vocab, cfg.model.image_size, cfg.model.patch_size)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let mut model = if resume && out.join("last.json").exists() {
        Model::load(&out.join("last.json")).map_err(|e| CliError::Validation(e.to_string()))?
    } else {
        Model::new(cfg, program_vocab, text_vocab, kb)
    };

    let val_set = if data.join("val").exists() {
        load_problems(&model, data, "val")?
    } else {
        Vec::new()
    };

    let summary = training::train(
        &mut model,
        &train_set,
        &val_set,
        &TrainOptions { run_dir: Some(out.clone()), resume },
    )?;

    if let Some(last) = summary.history.last() {
        println!(
            "trained {} epochs; final loss {:.4} (generation {:.4}, knowledge {:.4})",
            summary.epochs_run, last.loss.total, last.loss.generation, last.loss.knowledge
        );
    }
    if let (Some(best), Some(epoch)) = (summary.best_val_total, summary.best_epoch) {
        println!("best validation accuracy {best:.4} at epoch {epoch}");
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn format_report(report: &EvalReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("problems      {}\n", report.problems));
    s.push_str(&format!(
        "total         {:.4} ({}/{})\n",
        report.total_accuracy, report.correct, report.problems
    ));
    for (label, cat) in &report.categories {
        s.push_str(&format!(
            "  {label:<12}{:.4} ({}/{})\n",
            cat.accuracy, cat.correct, cat.total
        ));
    }
    s.push_str(&format!(
        "no-result     {:.4} ({}/{})\n",
        report.no_result_rate, report.no_result, report.problems
    ));
    s.push_str(&format!(
        "operator      {:.4} ({}/{})\n",
        report.op_accuracy, report.op_correct, report.step_count
    ));
    s.push_str(&format!(
        "whole-step    {:.4} ({}/{})\n",
        report.absolute_accuracy, report.absolute_correct, report.step_count
    ));
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Other(e.to_string()))?;
    }
    fs::write(path, text).map_err(|e| CliError::Other(e.to_string()))
}

fn eval(
    checkpoint: &Path,
    data: &Path,
    split: &str,
    out: Option<&Path>,
    set: &[String],
    workers: Option<usize>,
) -> Result<(), CliError> {
    let mut model = Model::load(checkpoint).map_err(|e| CliError::Validation(e.to_string()))?;
    model
        .cfg
        .apply_overrides(set.iter().map(|s| s.as_str()))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(n) = workers {
        model.cfg.decode.workers = n;
    }
    let problems = load_problems(&model, data, split)?;
    let report = evaluation::evaluate(&model, &problems).map_err(|e| CliError::Other(e.to_string()))?;
    print!("{}", format_report(&report));
    if let Some(path) = out {
        write_json(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn ablate(
    data: &Path,
    split: &str,
    out: Option<&Path>,
    config: Option<&Path>,
    set: &[String],
    workers: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = resolve_config(config, set, workers.map(|n| ("train.workers", n)))?;
    if let Some(n) = workers {
        cfg.decode.workers = n;
    }
    let kb = KnowledgeBase::sample();
    let program_vocab = ProgramVocabulary::default();
    let corpus = load_split(data, "train")?;
    let text_vocab = build_text_vocab(&corpus, &kb, cfg.model.max_numbers);
    let report = corpus.validate(&program_vocab, &kb, &text_vocab);
    if !report.clean() {
        return Err(validation_issues("train", &report));
    }
    let train_set = encode_corpus(&corpus, &text_vocab, &program_vocab, cfg.model.image_size, cfg.model.patch_size)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let eval_corpus = load_split(data, split)?;
    let eval_set =
        encode_corpus(&eval_corpus, &text_vocab, &program_vocab, cfg.model.image_size, cfg.model.patch_size)
            .map_err(|e| CliError::Validation(e.to_string()))?;

    let rows = evaluation::ablate(&cfg, &program_vocab, &text_vocab, &kb, &train_set, &eval_set)?;
    println!("{:<22}{:>10}{:>9}{:>11}", "variant", "params", "total", "no-result");
    for row in &rows {
        println!(
            "{:<22}{:>10}{:>9.4}{:>11.4}",
            row.ablation.label(),
            row.parameters,
            row.report.total_accuracy,
            row.report.no_result_rate
        );
    }
    if let Some(path) = out {
        write_json(path, &rows)?;
        println!("table written to {}", path.display());
    }
    Ok(())
}

fn sweep(
    checkpoint: &Path,
    data: &Path,
    split: &str,
    thresholds: &str,
    out: Option<&Path>,
    workers: Option<usize>,
) -> Result<(), CliError> {
    let thetas = parse_f64_list(thresholds, "thresholds")?;
    if thetas.is_empty() {
        return Err(CliError::Usage("--thresholds names at least one value".into()));
    }
    if let Some(t) = thetas.iter().find(|t| !(0.0 < **t && **t < 1.0)) {
        return Err(CliError::Usage(format!("--thresholds: {t} is outside (0,1)")));
    }
    let mut model = Model::load(checkpoint).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(n) = workers {
        model.cfg.decode.workers = n;
    }
    let problems = load_problems(&model, data, split)?;
    let points = evaluation::threshold_sweep(&mut model, &problems, &thetas)
        .map_err(|e| CliError::Other(e.to_string()))?;

    let mut table = String::from("threshold\ttotal_accuracy\tno_result_rate\top_accuracy\tabsolute_accuracy\n");
    for p in &points {
        println!(
            "theta {:>5.3}: total {:.4}, no-result {:.4}",
            p.threshold, p.total_accuracy, p.no_result_rate
        );
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.threshold, p.total_accuracy, p.no_result_rate, p.op_accuracy, p.absolute_accuracy
        ));
    }
    if let Some(path) = out {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Other(e.to_string()))?;
        }
        fs::write(path, table).map_err(|e| CliError::Other(e.to_string()))?;
        println!("curve written to {}", path.display());
    }
    Ok(())
}

/// Human-readable execution transcript shared by `exec` and its tests.
fn exec_report(
    vocab: &ProgramVocabulary,
    text: &str,
    numbers: &[f64],
    choices: Option<[f64; 4]>,
) -> Result<String, CliError> {
    let program = vocab.segment(text).map_err(|e| CliError::Validation(e.to_string()))?;
    let map = NumberMap::new(numbers.to_vec());
    let result = vocab.execute(&program, &map).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut s = String::new();
    let rendered = vocab.render(&program);
    for (j, (step_text, value)) in rendered.split(" ; ").zip(&result.variables).enumerate() {
        s.push_str(&format!("V_{j} = {value}  ({step_text})\n"));
    }
    s.push_str(&format!("final = {}\n", result.final_value));
    if let Some(choices) = choices {
        match vocab.match_choice(result.final_value, &choices) {
            Some(i) => s.push_str(&format!("matches choice {i} ({})\n", choices[i])),
            None => s.push_str("matches no choice\n"),
        }
    }
    Ok(s)
}

fn exec(
    program: Option<&Path>,
    program_text: Option<&str>,
    numbers: &str,
    choices: Option<&str>,
) -> Result<(), CliError> {
    let text = match (program, program_text) {
        (Some(path), None) => fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        (None, Some(t)) => t.to_string(),
        _ => return Err(CliError::Usage("pass exactly one of --program / --program-text".into())),
    };
    let numbers = parse_f64_list(numbers, "numbers")?;
    let choices = match choices {
        Some(raw) => {
            let v = parse_f64_list(raw, "choices")?;
            let arr: [f64; 4] = v
                .try_into()
                .map_err(|_| CliError::Usage("--choices takes exactly four values".into()))?;
            Some(arr)
        }
        None => None,
    };
    let vocab = ProgramVocabulary::default();
    print!("{}", exec_report(&vocab, text.trim(), &numbers, choices)?);
    Ok(())
}

/// Serialized trace document for one decoded problem.
#[derive(Serialize)]
struct TraceDocument {
    id: String,
    category: String,
    choices: [f64; 4],
    answer_index: usize,
    answer: Answer,
    candidates: Vec<TraceCandidate>,
    steps: Vec<TraceStep>,
}

#[derive(Serialize)]
struct TraceCandidate {
    rank: usize,
    score: f64,
    tokens: Vec<String>,
    program: Option<String>,
}

#[derive(Serialize)]
struct TraceStep {
    tokens: Vec<String>,
    token_logprobs: Vec<f64>,
    selected: Vec<TraceSelection>,
    scores: Option<Vec<f64>>,
    visual_weights: Option<Vec<f64>>,
    knowledge_weights: Option<Vec<f64>>,
    context_weights: Vec<Vec<f64>>,
    knowledge_state: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct TraceSelection {
    id: usize,
    concept: String,
}

fn trace(checkpoint: &Path, data: &Path, split: &str, id: &str, out: Option<&Path>) -> Result<(), CliError> {
    let model = Model::load(checkpoint).map_err(|e| CliError::Validation(e.to_string()))?;
    let problems = load_problems(&model, data, split)?;
    let enc = problems
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| CliError::Validation(format!("problem `{id}` not in split `{split}`")))?;

    let ranked = beam_decode(&model, enc, model.cfg.decode.beam)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let ans = answer(&model.program_vocab, &enc.numbers, &enc.choices, &ranked);
    let (_, trace) = score_sequence(&model, enc, &ranked[0].tokens, true)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let trace = trace.expect("collected trace");

    let name = |t: &usize| model.program_vocab.name_of(*t).to_string();
    let doc = TraceDocument {
        id: enc.id.clone(),
        category: enc.category.label().to_string(),
        choices: enc.choices,
        answer_index: enc.answer_index,
        answer: ans,
        candidates: ranked
            .iter()
            .enumerate()
            .map(|(rank, c)| TraceCandidate {
                rank,
                score: c.score,
                tokens: c.tokens.iter().map(|t| name(t)).collect(),
                program: c.program.as_ref().map(|p| model.program_vocab.render(p)),
            })
            .collect(),
        steps: trace
            .steps
            .iter()
            .map(|st| TraceStep {
                tokens: st.tokens.iter().map(|t| name(t)).collect(),
                token_logprobs: st.token_logprobs.clone(),
                selected: st
                    .selected
                    .iter()
                    .map(|&kid| TraceSelection {
                        id: kid,
                        concept: model.kb.get(kid).map_or_else(String::new, |e| e.concept.clone()),
                    })
                    .collect(),
                scores: st.scores.clone(),
                visual_weights: st.visual_weights.clone(),
                knowledge_weights: st.knowledge_weights.clone(),
                context_weights: st.context_weights.clone(),
                knowledge_state: st.r_per_token.as_ref().and_then(|snaps| snaps.first().cloned()),
            })
            .collect(),
    };

    match out {
        Some(path) => {
            write_json(path, &doc)?;
            println!("trace written to {}", path.display());
        }
        None => {
            let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Other(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}
