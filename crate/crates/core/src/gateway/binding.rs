use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    Classifier,
    Embedder,
    Generator,
    Scorer,
    Attributor,
}

impl EndpointKind {
    pub const ALL: [EndpointKind; 5] = [
        EndpointKind::Classifier,
        EndpointKind::Embedder,
        EndpointKind::Generator,
        EndpointKind::Scorer,
        EndpointKind::Attributor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EndpointKind::Classifier => "classifier",
            EndpointKind::Embedder => "embedder",
            EndpointKind::Generator => "generator",
            EndpointKind::Scorer => "scorer",
            EndpointKind::Attributor => "attributor",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EndpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where and how to reach one model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointBinding {
    pub kind: EndpointKind,
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_max_new_tokens() -> u32 {
    512
}

impl EndpointBinding {
    pub fn new(kind: EndpointKind, base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        EndpointBinding {
            kind,
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            temperature: 0.0,
            max_new_tokens: default_max_new_tokens(),
            api_key_env: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("endpoints.{}.{f}", self.kind);
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Config {
                field: field("timeout_secs"),
                message: "must be > 0".into(),
            });
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Config {
                field: field("temperature"),
                message: "must be >= 0".into(),
            });
        }
        if self.base_url.is_empty() {
            return Err(Error::Config {
                field: field("base_url"),
                message: "must not be empty".into(),
            });
        }
        Ok(())
    }

    pub(crate) fn expect(&self, kind: EndpointKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidInput(format!(
                "binding for {} used as {kind}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Per-kind table indexed by `EndpointKind`.
#[derive(Debug, Default)]
pub(crate) struct PerKind<T>([T; 5]);

impl<T> PerKind<T> {
    pub(crate) fn get(&self, kind: EndpointKind) -> &T {
        &self.0[kind.index()]
    }
}

impl<T> PerKind<T> {
    pub(crate) fn from_fn(f: impl FnMut(usize) -> T) -> Self {
        PerKind(std::array::from_fn(f))
    }
}
