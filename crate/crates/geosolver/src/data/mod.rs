//! Problem records, corpus storage, validation and model-ready encoding.
//!
//! A corpus is a directory: `problems.json` plus an `images/` folder with one
//! grayscale PNG per problem. Loading never drops records silently; a
//! separate [`Corpus::validate`] pass reports every inconsistency it finds so
//! callers decide what to tolerate.

pub mod diagram;
pub mod synth;
pub mod text;

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::knowledge::KnowledgeBase;
use crate::program::{NumberMap, Program, ProgramVocabulary};
use text::TextVocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Angle,
    Length,
    Other,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Angle, Category::Length, Category::Other];

    pub fn label(self) -> &'static str {
        match self {
            Category::Angle => "angle",
            Category::Length => "length",
            Category::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub id: String,
    pub text: String,
    /// Path of the diagram, relative to the corpus directory.
    pub image: String,
    pub choices: [f64; 4],
    pub answer_index: usize,
    /// Gold program in `;`-delimited surface form.
    pub program: String,
    /// Gold knowledge ids, one set per program step.
    pub knowledge: Vec<Vec<usize>>,
    pub category: Category,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus {path}: {reason}")]
    Format { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub problem_id: String,
    pub issue: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub checked: usize,
}

impl ValidationReport {
    pub fn clean(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Debug)]
pub struct Corpus {
    pub dir: PathBuf,
    pub problems: Vec<ProblemRecord>,
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let manifest = dir.join("problems.json");
        let text = std::fs::read_to_string(&manifest)
            .map_err(|e| CorpusError::Io { path: manifest.display().to_string(), source: e })?;
        let problems: Vec<ProblemRecord> = serde_json::from_str(&text)
            .map_err(|e| CorpusError::Format { path: manifest.display().to_string(), reason: e.to_string() })?;
        Ok(Corpus { dir: dir.to_path_buf(), problems })
    }

    pub fn image_path(&self, record: &ProblemRecord) -> PathBuf {
        self.dir.join(&record.image)
    }

    /// Check every record end to end: the gold program must segment, execute
    /// on the numbers its own text binds, and land on the stored answer;
    /// knowledge labels must align with steps; the diagram must load.
    pub fn validate(
        &self,
        vocab: &ProgramVocabulary,
        kb: &KnowledgeBase,
        text_vocab: &TextVocab,
    ) -> ValidationReport {
        let mut report = ValidationReport::default();
        for rec in &self.problems {
            report.checked += 1;
            let mut fail = |msg: String| {
                report.issues.push(ValidationIssue { problem_id: rec.id.clone(), issue: msg });
            };
            if rec.answer_index >= 4 {
                fail(format!("answer index {} out of range", rec.answer_index));
                continue;
            }
            let program = match vocab.segment(&rec.program) {
                Ok(p) => p,
                Err(e) => {
                    fail(format!("program does not segment: {e}"));
                    continue;
                }
            };
            let numbers = match text_vocab.encode(&rec.text) {
                Ok((_, n)) => n,
                Err(e) => {
                    fail(format!("text does not encode: {e}"));
                    continue;
                }
            };
            match vocab.execute(&program, &numbers) {
                Ok(result) => {
                    if vocab.match_choice(result.final_value, &rec.choices) != Some(rec.answer_index) {
                        fail(format!(
                            "program value {} does not match answer choice {}",
                            result.final_value, rec.choices[rec.answer_index]
                        ));
                    }
                }
                Err(e) => fail(format!("program does not execute: {e}")),
            }
            if rec.knowledge.len() != program.step_count() {
                fail(format!(
                    "{} knowledge label sets for {} steps",
                    rec.knowledge.len(),
                    program.step_count()
                ));
            }
            for step in &rec.knowledge {
                for &id in step {
                    if id >= kb.len() {
                        fail(format!("knowledge id {id} out of range"));
                    }
                }
            }
            if let Err(e) = diagram::load_grayscale(&self.image_path(rec)) {
                fail(format!("diagram: {e}"));
            }
        }
        report
    }

    /// Content digest covering text, labels and decoded pixels. Independent
    /// of PNG encoder details, stable across platforms.
    pub fn digest(&self) -> Result<String, CorpusError> {
        let mut hasher = Sha256::new();
        let mut sorted: Vec<&ProblemRecord> = self.problems.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        for rec in sorted {
            hasher.update(rec.id.as_bytes());
            hasher.update(rec.text.as_bytes());
            hasher.update(rec.program.as_bytes());
            for c in rec.choices {
                hasher.update(c.to_le_bytes());
            }
            hasher.update((rec.answer_index as u64).to_le_bytes());
            for step in &rec.knowledge {
                for &id in step {
                    hasher.update((id as u64).to_le_bytes());
                }
                hasher.update([0xFF]);
            }
            hasher.update(rec.category.label().as_bytes());
            let img = diagram::load_grayscale(&self.image_path(rec)).map_err(|e| CorpusError::Format {
                path: rec.image.clone(),
                reason: e.to_string(),
            })?;
            for v in img.iter() {
                hasher.update([(v * 255.0).round() as u8]);
            }
        }
        Ok(hex(&hasher.finalize()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable sub-seed for a labeled stream (split name, epoch index, …).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// Generate one split of a synthetic corpus under `dir/<split>/`.
pub fn synthesize_corpus(
    dir: &Path,
    split: &str,
    count: usize,
    seed: u64,
    image_size: usize,
    kb: &KnowledgeBase,
) -> Result<PathBuf, CorpusError> {
    let split_dir = dir.join(split);
    let images = split_dir.join("images");
    std::fs::create_dir_all(&images)
        .map_err(|e| CorpusError::Io { path: images.display().to_string(), source: e })?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, split));
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let draft = synth::generate(&mut rng, kb, image_size);
        let id = format!("{split}-{i:04}");
        let image_rel = format!("images/{id}.png");
        draft
            .canvas
            .save_png(&images.join(format!("{id}.png")))
            .map_err(|e| CorpusError::Format { path: image_rel.clone(), reason: e.to_string() })?;
        records.push(ProblemRecord {
            id,
            text: draft.text,
            image: image_rel,
            choices: draft.choices,
            answer_index: draft.answer_index,
            program: draft.program,
            knowledge: draft.knowledge,
            category: draft.category,
        });
    }
    let manifest = split_dir.join("problems.json");
    let json = serde_json::to_string_pretty(&records).expect("records serialize");
    std::fs::write(&manifest, json)
        .map_err(|e| CorpusError::Io { path: manifest.display().to_string(), source: e })?;
    Ok(split_dir)
}

/// A problem with everything the model consumes precomputed.
#[derive(Debug, Clone)]
pub struct EncodedProblem {
    pub id: String,
    pub text_ids: Vec<usize>,
    pub numbers: NumberMap,
    /// `n_patches × patch²` rows, row-major tiles of the resized diagram.
    pub patches: Array2<f64>,
    pub program: Program,
    pub knowledge: Vec<Vec<usize>>,
    pub choices: [f64; 4],
    pub answer_index: usize,
    pub category: Category,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("problem {id}: {reason}")]
    Problem { id: String, reason: String },
}

pub fn encode_problem(
    corpus: &Corpus,
    record: &ProblemRecord,
    text_vocab: &TextVocab,
    vocab: &ProgramVocabulary,
    image_size: usize,
    patch: usize,
) -> Result<EncodedProblem, IngestError> {
    let err = |reason: String| IngestError::Problem { id: record.id.clone(), reason };
    let (text_ids, numbers) = text_vocab.encode(&record.text).map_err(|e| err(e.to_string()))?;
    let program = vocab.segment(&record.program).map_err(|e| err(e.to_string()))?;
    let img = diagram::load_grayscale(&corpus.image_path(record)).map_err(|e| err(e.to_string()))?;
    let resized = diagram::resize(&img, image_size);
    let patches = diagram::patchify(&resized, patch).map_err(|e| err(e.to_string()))?;
    Ok(EncodedProblem {
        id: record.id.clone(),
        text_ids,
        numbers,
        patches,
        program,
        knowledge: record.knowledge.clone(),
        choices: record.choices,
        answer_index: record.answer_index,
        category: record.category,
    })
}

pub fn encode_corpus(
    corpus: &Corpus,
    text_vocab: &TextVocab,
    vocab: &ProgramVocabulary,
    image_size: usize,
    patch: usize,
) -> Result<Vec<EncodedProblem>, IngestError> {
    corpus
        .problems
        .iter()
        .map(|r| encode_problem(corpus, r, text_vocab, vocab, image_size, patch))
        .collect()
}

/// Build the word vocabulary a model trained on this corpus needs: every
/// problem text plus every knowledge explanation.
pub fn build_text_vocab(corpus: &Corpus, kb: &KnowledgeBase, max_numbers: usize) -> TextVocab {
    let texts: Vec<&str> = corpus
        .problems
        .iter()
        .map(|p| p.text.as_str())
        .chain(kb.entries().iter().map(|e| e.explanation.as_str()))
        .collect();
    TextVocab::build(texts, max_numbers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_corpus(dir: &Path) -> Corpus {
        let kb = KnowledgeBase::sample();
        let split = synthesize_corpus(dir, "train", 12, 7, 32, &kb).unwrap();
        Corpus::load(&split).unwrap()
    }

    #[test]
    fn synthesized_corpus_roundtrips_and_validates() {
        let tmp = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(tmp.path());
        assert_eq!(corpus.problems.len(), 12);
        let kb = KnowledgeBase::sample();
        let vocab = ProgramVocabulary::default();
        let tv = build_text_vocab(&corpus, &kb, vocab.max_problem_numbers());
        let report = corpus.validate(&vocab, &kb, &tv);
        assert!(report.clean(), "issues: {:?}", report.issues);
        assert_eq!(report.checked, 12);
    }

    #[test]
    fn validation_reports_broken_records_without_dropping() {
        let tmp = tempfile::tempdir().unwrap();
        let mut corpus = tiny_corpus(tmp.path());
        corpus.problems[0].program = "Half V_0".into();
        corpus.problems[1].answer_index = 9;
        corpus.problems[2].knowledge.push(vec![999]);
        let kb = KnowledgeBase::sample();
        let vocab = ProgramVocabulary::default();
        let tv = build_text_vocab(&corpus, &kb, 16);
        let report = corpus.validate(&vocab, &kb, &tv);
        assert_eq!(report.checked, 12, "every record is still checked");
        let bad_ids: Vec<&str> = report.issues.iter().map(|i| i.problem_id.as_str()).collect();
        assert!(bad_ids.contains(&corpus.problems[0].id.as_str()));
        assert!(bad_ids.contains(&corpus.problems[1].id.as_str()));
        assert!(bad_ids.contains(&corpus.problems[2].id.as_str()));
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let tmp = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(tmp.path());
        let d1 = corpus.digest().unwrap();
        let d2 = corpus.digest().unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 64);

        let tmp2 = tempfile::tempdir().unwrap();
        let kb = KnowledgeBase::sample();
        let split = synthesize_corpus(tmp2.path(), "train", 12, 8, 32, &kb).unwrap();
        let other = Corpus::load(&split).unwrap();
        assert_ne!(d1, other.digest().unwrap(), "different seed, different content");
    }

    #[test]
    fn same_seed_reproduces_identical_corpus() {
        let kb = KnowledgeBase::sample();
        let (t1, t2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let a = Corpus::load(&synthesize_corpus(t1.path(), "val", 10, 42, 32, &kb).unwrap()).unwrap();
        let b = Corpus::load(&synthesize_corpus(t2.path(), "val", 10, 42, 32, &kb).unwrap()).unwrap();
        assert_eq!(a.problems, b.problems);
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn splits_differ_under_one_seed() {
        let kb = KnowledgeBase::sample();
        let tmp = tempfile::tempdir().unwrap();
        let tr = Corpus::load(&synthesize_corpus(tmp.path(), "train", 8, 1, 32, &kb).unwrap()).unwrap();
        let va = Corpus::load(&synthesize_corpus(tmp.path(), "val", 8, 1, 32, &kb).unwrap()).unwrap();
        let tr_texts: Vec<&String> = tr.problems.iter().map(|p| &p.text).collect();
        let va_texts: Vec<&String> = va.problems.iter().map(|p| &p.text).collect();
        assert_ne!(tr_texts, va_texts);
    }

    #[test]
    fn encode_corpus_produces_model_inputs() {
        let tmp = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(tmp.path());
        let kb = KnowledgeBase::sample();
        let vocab = ProgramVocabulary::default();
        let tv = build_text_vocab(&corpus, &kb, vocab.max_problem_numbers());
        let encoded = encode_corpus(&corpus, &tv, &vocab, 32, 8).unwrap();
        assert_eq!(encoded.len(), corpus.problems.len());
        for e in &encoded {
            assert_eq!(e.patches.dim(), (16, 64));
            assert!(!e.text_ids.is_empty());
            assert_eq!(e.knowledge.len(), e.program.step_count());
            assert!(vocab.execute(&e.program, &e.numbers).is_ok());
        }
    }

    #[test]
    fn derive_seed_separates_labels() {
        assert_ne!(derive_seed(1, "train"), derive_seed(1, "val"));
        assert_ne!(derive_seed(1, "train"), derive_seed(2, "train"));
        assert_eq!(derive_seed(5, "epoch-3"), derive_seed(5, "epoch-3"));
    }
}
