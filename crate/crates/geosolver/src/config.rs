//! Run configuration: typed fields addressable by flat `section.key` names.
//!
//! Precedence is defaults, then an optional `key = value` file, then explicit
//! `--set key=value` overrides. Every artifact a run writes carries the fully
//! resolved configuration so results are reproducible from the file alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which architectural variant to build. Each drop removes a module and
/// rewires its consumers; `Full` is the complete dual-system model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    Full,
    /// No knowledge scorer: the auxiliary selection loss disappears and the
    /// knowledge-state update sees only visual context.
    NoSelector,
    /// No visual attention inside the knowledge system.
    NoVisualAttention,
    /// No recurrent knowledge state; the decoder attends knowledge directly.
    NoKnowledgeState,
    /// No goal decoder; the previous decoder state stands in for the goal.
    NoGoalDecoder,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Full,
        Ablation::NoSelector,
        Ablation::NoVisualAttention,
        Ablation::NoKnowledgeState,
        Ablation::NoGoalDecoder,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoSelector => "no-selector",
            Ablation::NoVisualAttention => "no-visual-attention",
            Ablation::NoKnowledgeState => "no-knowledge-state",
            Ablation::NoGoalDecoder => "no-goal-decoder",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Shared hidden width `d`.
    pub d: usize,
    pub heads: usize,
    pub text_layers: usize,
    pub fusion_blocks: usize,
    pub goal_layers: usize,
    pub max_text_len: usize,
    pub image_size: usize,
    pub patch_size: usize,
    pub max_numbers: usize,
    pub max_variables: usize,
    pub freeze_diagram: bool,
    /// Restrict decoding to grammatical tokens (also shapes the training
    /// softmax).
    pub legality_mask: bool,
    pub ablation: Ablation,
    /// Knowledge selection threshold θ at inference.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_text: f64,
    pub lr_fusion_goal: f64,
    pub lr_base: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip: f64,
    /// Probability of feeding predicted instead of gold knowledge per step.
    pub scheduled_sampling: f64,
    /// Run validation every this many epochs.
    pub eval_every: usize,
    /// Threads for the within-batch forward/backward passes. Gradients are
    /// summed in problem order, so the result is identical at any width.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam: usize,
    pub max_tokens: usize,
    pub max_steps: usize,
    /// Threads for evaluation; per-problem results keep corpus order.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            model: ModelConfig {
                d: 64,
                heads: 4,
                text_layers: 2,
                fusion_blocks: 2,
                goal_layers: 2,
                max_text_len: 64,
                image_size: 64,
                patch_size: 16,
                max_numbers: 16,
                max_variables: 8,
                freeze_diagram: false,
                legality_mask: true,
                ablation: Ablation::Full,
                threshold: 0.5,
            },
            train: TrainConfig {
                seed: 7,
                epochs: 100,
                batch_size: 32,
                lr_text: 2e-5,
                lr_fusion_goal: 1e-5,
                lr_base: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                grad_clip: 5.0,
                scheduled_sampling: 0.0,
                eval_every: 10,
                workers: 1,
            },
            decode: DecodeConfig { beam: 10, max_tokens: 32, max_steps: 8, workers: 1 },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}` ({expected})")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("line {line}: expected `key = value`")]
    BadLine { line: usize },
    #[error("config file {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

macro_rules! config_keys {
    ($($key:literal => $($path:ident).+, $parse:ident;)*) => {
        pub const KEYS: &'static [&'static str] = &[$($key),*];

        pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
            match key {
                $($key => {
                    self.$($path).+ = Self::$parse(key, value)?;
                    Ok(())
                })*
                _ => Err(ConfigError::UnknownKey(key.to_string())),
            }
        }

        pub fn get(&self, key: &str) -> Option<String> {
            match key {
                $($key => Some(self.$($path).+.flat()),)*
                _ => None,
            }
        }
    };
}

pub trait FlatValue {
    fn flat(&self) -> String;
}

impl FlatValue for usize {
    fn flat(&self) -> String {
        self.to_string()
    }
}
impl FlatValue for u64 {
    fn flat(&self) -> String {
        self.to_string()
    }
}
impl FlatValue for f64 {
    fn flat(&self) -> String {
        format!("{self}")
    }
}
impl FlatValue for bool {
    fn flat(&self) -> String {
        self.to_string()
    }
}
impl FlatValue for Ablation {
    fn flat(&self) -> String {
        self.label().to_string()
    }
}

impl Config {
    config_keys! {
        "model.d" => model.d, parse_usize;
        "model.heads" => model.heads, parse_usize;
        "model.text_layers" => model.text_layers, parse_usize;
        "model.fusion_blocks" => model.fusion_blocks, parse_usize;
        "model.goal_layers" => model.goal_layers, parse_usize;
        "model.max_text_len" => model.max_text_len, parse_usize;
        "model.image_size" => model.image_size, parse_usize;
        "model.patch_size" => model.patch_size, parse_usize;
        "model.max_numbers" => model.max_numbers, parse_usize;
        "model.max_variables" => model.max_variables, parse_usize;
        "model.freeze_diagram" => model.freeze_diagram, parse_bool;
        "model.legality_mask" => model.legality_mask, parse_bool;
        "model.ablation" => model.ablation, parse_ablation;
        "model.threshold" => model.threshold, parse_f64;
        "train.seed" => train.seed, parse_u64;
        "train.epochs" => train.epochs, parse_usize;
        "train.batch_size" => train.batch_size, parse_usize;
        "train.lr_text" => train.lr_text, parse_f64;
        "train.lr_fusion_goal" => train.lr_fusion_goal, parse_f64;
        "train.lr_base" => train.lr_base, parse_f64;
        "train.beta1" => train.beta1, parse_f64;
        "train.beta2" => train.beta2, parse_f64;
        "train.eps" => train.eps, parse_f64;
        "train.grad_clip" => train.grad_clip, parse_f64;
        "train.scheduled_sampling" => train.scheduled_sampling, parse_f64;
        "train.eval_every" => train.eval_every, parse_usize;
        "train.workers" => train.workers, parse_usize;
        "decode.beam" => decode.beam, parse_usize;
        "decode.max_tokens" => decode.max_tokens, parse_usize;
        "decode.max_steps" => decode.max_steps, parse_usize;
        "decode.workers" => decode.workers, parse_usize;
    }

    fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
        v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into(), expected: "integer" })
    }

    fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
        v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into(), expected: "integer" })
    }

    fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
        v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into(), expected: "number" })
    }

    fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
        match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "true/false" }),
        }
    }

    fn parse_ablation(key: &str, v: &str) -> Result<Ablation, ConfigError> {
        Ablation::parse(v).ok_or_else(|| ConfigError::BadValue {
            key: key.into(),
            value: v.into(),
            expected: "full | no-selector | no-visual-attention | no-knowledge-state | no-goal-decoder",
        })
    }

    /// Apply a `key = value` file on top of the current values.
    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::BadLine { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply `key=value` pairs (CLI `--set`).
    pub fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<(), ConfigError> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| ConfigError::BadValue { key: pair.into(), value: String::new(), expected: "key=value" })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The fully resolved flat form, ready to write next to an artifact.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let value = self.get(key).expect("every listed key resolves");
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn save_resolved(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.resolved())
    }

    /// Structural sanity checks; call after all layering is done.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.d == 0 || m.d % m.heads != 0 {
            return Err(ConfigError::Invalid(format!("model.d = {} must be a positive multiple of model.heads = {}", m.d, m.heads)));
        }
        if m.d % 2 != 0 {
            return Err(ConfigError::Invalid(
                "model.d must be even (the recurrent text encoder runs d/2 per direction)".into(),
            ));
        }
        if m.image_size % m.patch_size != 0 {
            return Err(ConfigError::Invalid(format!(
                "model.image_size = {} must be divisible by model.patch_size = {}",
                m.image_size, m.patch_size
            )));
        }
        if !(0.0 < m.threshold && m.threshold < 1.0) {
            return Err(ConfigError::Invalid(format!("model.threshold = {} must lie in (0, 1)", m.threshold)));
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 || self.train.eval_every == 0 {
            return Err(ConfigError::Invalid("train.batch_size, train.epochs and train.eval_every must be positive".into()));
        }
        for (name, lr) in [
            ("train.lr_text", self.train.lr_text),
            ("train.lr_fusion_goal", self.train.lr_fusion_goal),
            ("train.lr_base", self.train.lr_base),
        ] {
            if !(lr > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.train.scheduled_sampling) {
            return Err(ConfigError::Invalid("train.scheduled_sampling must lie in [0, 1]".into()));
        }
        if self.decode.beam == 0 || self.decode.max_tokens == 0 || self.decode.max_steps == 0 {
            return Err(ConfigError::Invalid("decode.beam, decode.max_tokens and decode.max_steps must be positive".into()));
        }
        if self.train.workers == 0 || self.decode.workers == 0 {
            return Err(ConfigError::Invalid("worker counts must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn file_then_overrides_layering() {
        let mut c = Config::default();
        c.apply_text("model.d = 32\ntrain.epochs = 5  # quick run\n\ndecode.beam = 3\n").unwrap();
        assert_eq!(c.model.d, 32);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.decode.beam, 3);
        c.apply_overrides(["model.d=16", "model.ablation=no-goal-decoder"]).unwrap();
        assert_eq!(c.model.d, 16);
        assert_eq!(c.model.ablation, Ablation::NoGoalDecoder);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut c = Config::default();
        assert!(matches!(c.set("model.nope", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.set("model.d", "wide"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(c.apply_text("just a line"), Err(ConfigError::BadLine { line: 1 })));
        assert!(matches!(c.set("model.ablation", "w/o"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn resolved_roundtrips() {
        let mut c = Config::default();
        c.set("model.d", "48").unwrap();
        c.set("train.lr_base", "0.005").unwrap();
        let text = c.resolved();
        let mut back = Config::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_catches_structural_errors() {
        let mut c = Config::default();
        c.model.d = 30; // not divisible by 4 heads
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.model.patch_size = 48;
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.model.threshold = 1.0;
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.train.batch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn ablation_labels_roundtrip() {
        for a in Ablation::ALL {
            assert_eq!(Ablation::parse(a.label()), Some(a));
        }
        assert_eq!(Ablation::parse("bogus"), None);
    }
}
