//! Request and response bodies of the model-service and chat-completions protocols.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PREDICT: &str = "/predict";
pub const EMBED: &str = "/embed";
pub const LOGPROBS: &str = "/logprobs";
pub const ATTRIBUTE: &str = "/attribute";
pub const INFO: &str = "/info";
pub const CHAT: &str = "/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// Label order of `probabilities`; must equal the run's label set when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsResponse {
    pub tokens: Vec<String>,
    /// `null` marks an unscored token (the first one, for autoregressive scorers).
    pub logprobs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRequest {
    pub text: String,
    pub target_label: String,
    pub method: String,
    pub ig_steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeResponse {
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    /// Word index per token, `null` for special tokens.
    pub word_alignment: Vec<Option<usize>>,
    #[serde(default)]
    pub special_tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub labels: Vec<String>,
    pub embedding_dim: usize,
    pub max_length: usize,
    #[serde(default)]
    pub capabilities: Vec<String>,
    /// Model name to checkpoint content hash.
    #[serde(default)]
    pub models: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

impl ChatResponse {
    pub fn single(content: impl Into<String>) -> Self {
        ChatResponse {
            choices: vec![ChatChoice {
                message: ChatMessage {
                    role: "assistant".into(),
                    content: content.into(),
                },
            }],
        }
    }
}
