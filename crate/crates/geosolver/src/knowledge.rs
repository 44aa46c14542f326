//! The external knowledge base: named geometry concepts with one-sentence
//! textual explanations.
//!
//! Entries are identified by their index in load order. The knowledge-aware
//! system scores all `N` entries per step; selected explanations are
//! concatenated in ascending id order with a separator token so the result is
//! independent of selection order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator placed between concatenated explanations.
pub const KSEP: &str = "<ksep>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub concept: String,
    pub explanation: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnowledgeError {
    #[error("duplicate concept `{0}`")]
    DuplicateConcept(String),
    #[error("concept `{0}` has an empty explanation")]
    EmptyExplanation(String),
    #[error("knowledge base is empty")]
    EmptyKnowledgeBase,
    #[error("knowledge base file: {0}")]
    Format(String),
}

/// An ordered, validated collection of knowledge entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    entries: Vec<KnowledgeEntry>,
}

impl KnowledgeBase {
    pub fn new(entries: Vec<KnowledgeEntry>) -> Result<Self, KnowledgeError> {
        if entries.is_empty() {
            return Err(KnowledgeError::EmptyKnowledgeBase);
        }
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if e.explanation.trim().is_empty() {
                return Err(KnowledgeError::EmptyExplanation(e.concept.clone()));
            }
            if !seen.insert(e.concept.clone()) {
                return Err(KnowledgeError::DuplicateConcept(e.concept.clone()));
            }
        }
        Ok(KnowledgeBase { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, KnowledgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| KnowledgeError::Format(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, KnowledgeError> {
        let entries: Vec<KnowledgeEntry> =
            serde_json::from_str(text).map_err(|e| KnowledgeError::Format(e.to_string()))?;
        Self::new(entries)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(&self.entries).expect("entries serialize");
        std::fs::write(path, json)
    }

    /// The bundled sample base covering the concepts the synthetic templates
    /// draw on.
    pub fn sample() -> Self {
        Self::from_json(include_str!("../assets/knowledge_base.json")).expect("bundled base is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&KnowledgeEntry> {
        self.entries.get(id)
    }

    pub fn id_of(&self, concept: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.concept == concept)
    }

    /// Concatenate the selected explanations in ascending id order, joined by
    /// [`KSEP`]. Duplicate and out-of-range ids are ignored; an empty
    /// selection yields an empty string.
    pub fn concat_explanations(&self, selected: &[usize]) -> String {
        let mut ids: Vec<usize> = selected.iter().copied().filter(|&i| i < self.entries.len()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .map(|&i| self.entries[i].explanation.as_str())
            .collect::<Vec<_>>()
            .join(&format!(" {KSEP} "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_base_contains_pinned_entry() {
        let kb = KnowledgeBase::sample();
        let id = kb.id_of("Parallel Lines").expect("sample base names the concept");
        assert_eq!(
            kb.get(id).unwrap().explanation,
            "If the two lines are parallel, then consecutive interior angles are supplementary"
        );
        assert!(kb.len() >= 20, "sample base has {} entries", kb.len());
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let dup = vec![
            KnowledgeEntry { concept: "A".into(), explanation: "x".into() },
            KnowledgeEntry { concept: "A".into(), explanation: "y".into() },
        ];
        assert!(matches!(KnowledgeBase::new(dup), Err(KnowledgeError::DuplicateConcept(_))));
        let empty_expl = vec![KnowledgeEntry { concept: "B".into(), explanation: "  ".into() }];
        assert!(matches!(KnowledgeBase::new(empty_expl), Err(KnowledgeError::EmptyExplanation(_))));
        assert!(matches!(KnowledgeBase::new(vec![]), Err(KnowledgeError::EmptyKnowledgeBase)));
    }

    #[test]
    fn concat_is_order_invariant_and_ascending() {
        let kb = KnowledgeBase::sample();
        let a = kb.concat_explanations(&[2, 0, 5]);
        let b = kb.concat_explanations(&[5, 2, 0, 2]);
        assert_eq!(a, b);
        let first = kb.get(0).unwrap().explanation.clone();
        assert!(a.starts_with(&first));
        assert_eq!(a.matches(KSEP).count(), 2);
        assert_eq!(kb.concat_explanations(&[]), "");
    }

    #[test]
    fn roundtrips_through_disk() {
        let kb = KnowledgeBase::sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.json");
        kb.save(&path).unwrap();
        assert_eq!(KnowledgeBase::load(&path).unwrap(), kb);
    }
}
