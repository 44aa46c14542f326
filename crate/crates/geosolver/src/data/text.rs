//! Word-level text tokenization with positional number binding.
//!
//! Numeric literals in problem text are replaced by slot tokens `N_0, N_1, …`
//! in order of first appearance; the literal values move to a [`NumberMap`]
//! so programs can reference them symbolically. The same vocabulary encodes
//! knowledge explanations, which may contain the `<ksep>` separator.

use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KSEP;
use crate::program::NumberMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("text binds {found} numbers, vocabulary allows {max}")]
    TooManyNumbers { found: usize, max: usize },
    #[error("text is empty after tokenization")]
    EmptyText,
}

/// A token as split from raw text, before vocabulary lookup.
#[derive(Debug, Clone, PartialEq)]
pub enum RawToken {
    Word(String),
    Number(f64),
    Ksep,
}

/// Lowercase, strip punctuation, split out numbers. `40`, `7.5` and `40.`
/// all parse as numbers; words keep internal hyphens.
pub fn tokenize(text: &str) -> Vec<RawToken> {
    let mut out = Vec::new();
    for piece in text.split_whitespace() {
        if piece == KSEP {
            out.push(RawToken::Ksep);
            continue;
        }
        let trimmed: &str = piece.trim_matches(|c: char| !(c.is_alphanumeric() || c == '.' || c == '-'));
        if trimmed.is_empty() {
            continue;
        }
        let cleaned = trimmed.trim_end_matches('.');
        if let Ok(v) = cleaned.parse::<f64>() {
            out.push(RawToken::Number(v));
        } else {
            out.push(RawToken::Word(cleaned.to_lowercase()));
        }
    }
    out
}

/// Fixed-id word vocabulary: `<pad>=0, <unk>=1, <ksep>=2`, then the number
/// slots, then sorted corpus words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextVocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub max_numbers: usize,
}

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const KSEP_ID: usize = 2;

impl TextVocab {
    /// Build from every text the model will ever see at training time
    /// (problem texts plus knowledge explanations).
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_numbers: usize) -> Self {
        let mut seen = BTreeSet::new();
        for t in texts {
            for tok in tokenize(t) {
                if let RawToken::Word(w) = tok {
                    seen.insert(w);
                }
            }
        }
        let mut words = vec!["<pad>".to_string(), "<unk>".to_string(), KSEP.to_string()];
        words.extend((0..max_numbers).map(|i| format!("N_{i}")));
        words.extend(seen);
        let mut vocab = TextVocab { words, index: HashMap::new(), max_numbers };
        vocab.rebuild_index();
        vocab
    }

    pub fn rebuild_index(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    fn number_slot_id(&self, slot: usize) -> usize {
        3 + slot
    }

    /// Encode problem text: number literals become slot tokens in order of
    /// appearance and their values are collected into the returned map.
    pub fn encode(&self, text: &str) -> Result<(Vec<usize>, NumberMap), TextError> {
        let mut ids = Vec::new();
        let mut numbers = Vec::new();
        for tok in tokenize(text) {
            match tok {
                RawToken::Word(w) => ids.push(self.id_of(&w).unwrap_or(UNK)),
                RawToken::Ksep => ids.push(KSEP_ID),
                RawToken::Number(v) => {
                    let slot = numbers.len();
                    if slot >= self.max_numbers {
                        return Err(TextError::TooManyNumbers {
                            found: slot + 1,
                            max: self.max_numbers,
                        });
                    }
                    numbers.push(v);
                    ids.push(self.number_slot_id(slot));
                }
            }
        }
        if ids.is_empty() {
            return Err(TextError::EmptyText);
        }
        Ok((ids, NumberMap::new(numbers)))
    }

    /// Encode explanation text (numbers are rare there; they bind slots of a
    /// throwaway map and the caller keeps only the ids).
    pub fn encode_plain(&self, text: &str) -> Result<Vec<usize>, TextError> {
        self.encode(text).map(|(ids, _)| ids)
    }
}

/// Format a number the way templates embed them in text: integers stay
/// integral, everything else keeps one decimal.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.1}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_numbers_and_words() {
        let toks = tokenize("Angle AOB measures 40 degrees, AB = 7.5.");
        assert_eq!(
            toks,
            vec![
                RawToken::Word("angle".into()),
                RawToken::Word("aob".into()),
                RawToken::Word("measures".into()),
                RawToken::Number(40.0),
                RawToken::Word("degrees".into()),
                RawToken::Word("ab".into()),
                RawToken::Number(7.5),
            ]
        );
    }

    #[test]
    fn encode_binds_numbers_positionally() {
        let v = TextVocab::build(["angle measures 1 and 2 degrees"], 4);
        let (ids, numbers) = v.encode("angle measures 40 and 25.5 degrees").unwrap();
        assert_eq!(numbers.values, vec![40.0, 25.5]);
        assert_eq!(ids[2], 3); // N_0 slot
        assert_eq!(ids[4], 4); // N_1 slot
        let w: Vec<&str> = ids.iter().map(|&i| v.word(i)).collect();
        assert_eq!(w, vec!["angle", "measures", "N_0", "and", "N_1", "degrees"]);
    }

    #[test]
    fn encode_rejects_number_overflow_and_empty() {
        let v = TextVocab::build(["x 1"], 2);
        assert!(matches!(
            v.encode("1 2 3"),
            Err(TextError::TooManyNumbers { found: 3, max: 2 })
        ));
        assert!(matches!(v.encode("  ,, "), Err(TextError::EmptyText)));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = TextVocab::build(["known words only"], 2);
        let (ids, _) = v.encode("known mystery").unwrap();
        assert_eq!(ids[1], UNK);
        assert_ne!(ids[0], UNK);
    }

    #[test]
    fn ksep_is_preserved() {
        let v = TextVocab::build(["a b"], 2);
        let ids = v.encode_plain(&format!("a {KSEP} b")).unwrap();
        assert_eq!(ids[1], KSEP_ID);
    }

    #[test]
    fn vocab_ids_are_sorted_and_stable() {
        let a = TextVocab::build(["beta alpha", "gamma alpha"], 2);
        let b = TextVocab::build(["gamma", "alpha beta"], 2);
        assert_eq!(a.words, b.words, "vocabulary is set-derived, order independent");
        let json = serde_json::to_string(&a).unwrap();
        let mut back: TextVocab = serde_json::from_str(&json).unwrap();
        back.rebuild_index();
        assert_eq!(back, a);
        assert_eq!(back.id_of("alpha"), a.id_of("alpha"));
    }

    #[test]
    fn format_number_roundtrips_through_tokenizer() {
        for v in [40.0, 7.5, 180.0, 0.5] {
            let text = format!("x {} y", format_number(v));
            match &tokenize(&text)[1] {
                RawToken::Number(n) => assert_eq!(*n, v),
                other => panic!("expected number, got {other:?}"),
            }
        }
    }
}
