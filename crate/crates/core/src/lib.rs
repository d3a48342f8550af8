// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod faithfulness;
pub mod gateway;
pub mod manifest;
pub mod pipeline;
pub mod prompts;
pub mod selection;
pub mod text;
pub mod types;

pub use error::{Error, Result};
