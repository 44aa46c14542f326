//! The assembled solver: perception, the two reasoning systems, and every
//! artifact needed to run them (parameter store, vocabularies, knowledge
//! base, configuration). Checkpoints carry all of it, so a saved model
//! reloads without access to the original corpus.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::data::derive_seed;
use crate::data::text::TextVocab;
use crate::inference_system::InferenceSystem;
use crate::knowledge::{KnowledgeBase, KnowledgeEntry};
use crate::knowledge_system::KnowledgeSystem;
use crate::nn::{Ctx, LrGroup, ParamStore};
use crate::perception::{Perception, PerceptionError};
use crate::program::{ProgramVocabulary, VocabularyFile};
use crate::tape::NodeId;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

pub struct Model {
    pub cfg: Config,
    pub store: ParamStore,
    pub program_vocab: ProgramVocabulary,
    pub text_vocab: TextVocab,
    pub kb: KnowledgeBase,
    pub perception: Perception,
    pub knowledge_system: KnowledgeSystem,
    pub inference_system: InferenceSystem,
    /// Knowledge-base entries pre-encoded to text ids, in entry order.
    pub kb_token_ids: Vec<Vec<usize>>,
}

impl Model {
    /// Build a fresh model. Parameter initialization draws from a stream
    /// derived from `train.seed`, independent of data order.
    pub fn new(
        cfg: Config,
        program_vocab: ProgramVocabulary,
        text_vocab: TextVocab,
        kb: KnowledgeBase,
    ) -> Self {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.train.seed, "init"));
        let perception = Perception::new(&mut store, &mut rng, &cfg.model, text_vocab.len());
        let knowledge_system = KnowledgeSystem::new(&mut store, &mut rng, &cfg.model, kb.len());
        let inference_system = InferenceSystem::new(
            &mut store,
            &mut rng,
            &cfg.model,
            program_vocab.len(),
            cfg.decode.max_tokens,
        );
        if cfg.model.freeze_diagram {
            store.freeze_prefix("diag.");
        }
        assert_group_partition(&store);

        let kb_token_ids = kb
            .entries()
            .iter()
            .map(|e| {
                text_vocab
                    .encode_plain(&e.explanation)
                    .expect("knowledge explanations are non-empty")
            })
            .collect();

        Model {
            cfg,
            store,
            program_vocab,
            text_vocab,
            kb,
            perception,
            knowledge_system,
            inference_system,
            kb_token_ids,
        }
    }

    /// Token ids of the selected entries' explanations, joined by the
    /// knowledge separator and truncated to the encoder's window. `selected`
    /// is deduplicated and ordered ascending so equal sets encode equally.
    pub fn selected_knowledge_ids(&self, selected: &[usize]) -> Vec<usize> {
        let mut ids: Vec<usize> = selected.to_vec();
        ids.sort_unstable();
        ids.dedup();
        assert!(!ids.is_empty(), "selection is never empty (argmax fallback)");
        let mut out = Vec::new();
        for (n, &i) in ids.iter().enumerate() {
            if n > 0 {
                out.push(crate::data::text::KSEP_ID);
            }
            out.extend_from_slice(&self.kb_token_ids[i]);
        }
        out.truncate(self.cfg.model.max_text_len);
        out
    }

    /// Encode a knowledge selection to per-token states (`n_c×d`).
    pub fn encode_selected_knowledge(
        &self,
        ctx: &Ctx,
        selected: &[usize],
    ) -> Result<NodeId, PerceptionError> {
        self.perception.encode_text(ctx, &self.selected_knowledge_ids(selected))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let params = self
            .store
            .entries()
            .iter()
            .map(|e| ParamRecord {
                name: e.name.clone(),
                group: e.group,
                frozen: e.frozen,
                rows: e.value.nrows(),
                cols: e.value.ncols(),
                data: e.value.iter().copied().collect(),
            })
            .collect();
        let file = CheckpointFile {
            config: self.cfg.clone(),
            program_vocab: self.program_vocab.to_file(),
            text_vocab: self.text_vocab.clone(),
            knowledge_base: self.kb.entries().to_vec(),
            params,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let json = serde_json::to_string(&file).expect("checkpoints serialize");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| CheckpointError::Format(e.to_string()))?;
        let program_vocab = ProgramVocabulary::from_file(&file.program_vocab)
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
        let mut text_vocab = file.text_vocab;
        text_vocab.rebuild_index();
        let kb = KnowledgeBase::new(file.knowledge_base)
            .map_err(|e| CheckpointError::Format(e.to_string()))?;

        let mut model = Model::new(file.config, program_vocab, text_vocab, kb);
        if file.params.len() != model.store.len() {
            return Err(CheckpointError::Format(format!(
                "checkpoint has {} parameters, the configured model has {}",
                file.params.len(),
                model.store.len()
            )));
        }
        for rec in file.params {
            let id = model.store.id(&rec.name).ok_or_else(|| {
                CheckpointError::Format(format!("unknown parameter `{}`", rec.name))
            })?;
            if rec.data.len() != rec.rows * rec.cols
                || model.store.value(id).dim() != (rec.rows, rec.cols)
            {
                return Err(CheckpointError::Format(format!(
                    "parameter `{}` has shape {}×{} in the checkpoint",
                    rec.name, rec.rows, rec.cols
                )));
            }
            let value = Array2::from_shape_vec((rec.rows, rec.cols), rec.data)
                .expect("length checked above");
            model.store.set_value(id, value);
            model.store.set_frozen(id, rec.frozen);
        }
        Ok(model)
    }
}

/// Learning-rate groups are assigned by construction; this pins the mapping
/// from parameter names to groups so a misplaced module fails loudly at
/// startup rather than silently training at the wrong rate.
pub fn assert_group_partition(store: &ParamStore) {
    for e in store.entries() {
        let expect = if e.name.starts_with("text.ctx") {
            LrGroup::ContextualText
        } else if e.name.starts_with("fuse.") || e.name.starts_with("inf.goal") {
            LrGroup::FusionGoal
        } else {
            LrGroup::Base
        };
        assert_eq!(
            e.group, expect,
            "parameter `{}` sits in {:?}, expected {:?}",
            e.name, e.group, expect
        );
    }
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    group: LrGroup,
    frozen: bool,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    config: Config,
    program_vocab: VocabularyFile,
    text_vocab: TextVocab,
    knowledge_base: Vec<KnowledgeEntry>,
    params: Vec<ParamRecord>,
}
