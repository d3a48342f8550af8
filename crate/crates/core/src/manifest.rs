//! Per-run manifest: the resolved configuration, overrides, seeds, input
//! hashes and the hash of every model response the run consumed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::gateway::cache::{canonical_json, content_hash};
use crate::prompts::PromptSet;
use crate::types::Instance;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub response_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_sha256: String,
    pub config: RunConfig,
    pub overrides: Vec<String>,
    pub seed: u64,
    pub dataset_sha256: String,
    pub prompt_sha256: BTreeMap<String, String>,
    /// Sorted by cache key.
    pub transcript: Vec<TranscriptEntry>,
}

/// Content hash of a configuration, independent of field order.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let v = serde_json::to_value(config)?;
    Ok(content_hash(canonical_json(&v).as_bytes()))
}

pub fn dataset_hash(instances: &[Instance]) -> Result<String> {
    let mut bytes = Vec::new();
    for i in instances {
        serde_json::to_writer(&mut bytes, i)?;
        bytes.push(b'\n');
    }
    Ok(content_hash(&bytes))
}

impl Manifest {
    pub fn new(
        config: &RunConfig,
        overrides: &[String],
        dataset: &[Instance],
        prompts: &PromptSet,
        transcript: &[(String, String)],
    ) -> Result<Self> {
        let prompt_sha256 = [
            ("zerocf", &prompts.zerocf),
            ("fitcf", &prompts.fitcf),
            ("fizle_words", &prompts.fizle_words),
            ("fizle_edit", &prompts.fizle_edit),
            ("flip_judge", &prompts.flip_judge),
        ]
        .into_iter()
        .map(|(k, t)| (k.to_owned(), content_hash(t.text.as_bytes())))
        .collect();
        let mut transcript: Vec<TranscriptEntry> = transcript
            .iter()
            .map(|(k, h)| TranscriptEntry {
                key: k.clone(),
                response_sha256: h.clone(),
            })
            .collect();
        transcript.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(Manifest {
            code_version: CODE_VERSION.to_owned(),
            config_sha256: config_hash(config)?,
            config: config.clone(),
            overrides: overrides.to_vec(),
            seed: config.seed,
            dataset_sha256: dataset_hash(dataset)?,
            prompt_sha256,
            transcript,
        })
    }
}
