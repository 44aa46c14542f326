//! Compiles every fenced Rust block in the guide under `book/` as a
//! doc-test, one module per chapter so a failure names its source file.
//! Only built for `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/programs.md")]
mod programs {}

#[doc = include_str!("../../../book/src/knowledge.md")]
mod knowledge {}

#[doc = include_str!("../../../book/src/corpus.md")]
mod corpus {}

#[doc = include_str!("../../../book/src/architecture.md")]
mod architecture {}

#[doc = include_str!("../../../book/src/reasoning.md")]
mod reasoning {}

#[doc = include_str!("../../../book/src/training.md")]
mod training {}

#[doc = include_str!("../../../book/src/decoding.md")]
mod decoding {}

#[doc = include_str!("../../../book/src/evaluation.md")]
mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
