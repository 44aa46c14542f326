//! A dual-system neural solver for multiple-choice geometry problems.
//!
//! The solver reads a problem as (diagram, text, four numeric choices) and
//! produces an executable program over a small arithmetic DSL. Executing the
//! program yields a numeric result which is matched against the choices.
//! Program generation is step-wise: an implicit *knowledge system* retrieves
//! diagram context and textual geometry knowledge for the current reasoning
//! goal, and an explicit *inference system* emits the program tokens of one
//! reasoning step at a time, then proposes the next goal.
//!
//! The crate is organized in layers:
//!
//! - [`program`] — the program vocabulary, step segmentation and the executor
//! - [`knowledge`] — the knowledge base of concept/explanation pairs
//! - [`data`] — problem ingestion, number mapping, diagram patching and a
//!   synthetic corpus generator used by the test and evaluation harness
//! - [`tape`] / [`nn`] — a small reverse-mode autodiff tape and the neural
//!   building blocks (LSTM cells, multi-head attention, layer norm)
//! - [`perception`] — text/diagram encoders and multimodal fusion
//! - [`knowledge_system`] / [`inference_system`] — the two halves of the
//!   dual reasoner
//! - [`reasoner`] — teacher-forced training forward and beam-search decoding
//! - [`training`] — losses, the optimizer, the training loop and checkpoints
//! - [`evaluation`] — accuracy metrics, ablations and threshold sweeps
//! - [`config`] / [`cli`] — flat key-value run configuration and the CLI
//!
//! A rendered guide with worked examples lives in `book/` at the repository
//! root; its code blocks are compiled and run as doc-tests.
//!
//! # Example
//!
//! ```rust
//! use geosolver::program::{ProgramVocabulary, NumberMap};
//!
//! let vocab = ProgramVocabulary::default();
//! let program = vocab.segment("Minus C_3 N_0 ; Half V_0").unwrap();
//! let numbers = NumberMap::new(vec![40.0]);
//! let result = vocab.execute(&program, &numbers).unwrap();
//! assert_eq!(result.final_value, 70.0);
//! assert_eq!(vocab.match_choice(result.final_value, &[35.0, 70.0, 110.0, 140.0]), Some(1));
//! ```

pub mod cli;
pub mod config;
pub mod data;
pub mod evaluation;
pub mod inference_system;
pub mod knowledge;
pub mod knowledge_system;
pub mod model;
pub mod nn;
pub mod perception;
pub mod program;
pub mod reasoner;
pub mod tape;
pub mod training;

#[cfg(doctest)]
mod book;

#[cfg(test)]
mod test_util;
