//! The guide under `book/src`, one module per chapter, so that
//! `cargo test -p fitcf-book` runs every Rust snippet in it.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/quickstart.md")]
pub mod quickstart {}

#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}

#[doc = include_str!("../../../book/src/attribution.md")]
pub mod attribution {}

#[doc = include_str!("../../../book/src/demonstrations.md")]
pub mod demonstrations {}

#[doc = include_str!("../../../book/src/generation.md")]
pub mod generation {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/faithfulness.md")]
pub mod faithfulness {}

#[doc = include_str!("../../../book/src/ablation.md")]
pub mod ablation {}

#[doc = include_str!("../../../book/src/caching.md")]
pub mod caching {}

#[doc = include_str!("../../../book/src/outputs.md")]
pub mod outputs {}

#[doc = include_str!("../../../book/src/wire-protocol.md")]
pub mod wire_protocol {}
