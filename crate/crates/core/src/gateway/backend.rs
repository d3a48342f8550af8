//! Transports that actually reach a model endpoint.

use std::time::Duration;

use serde_json::Value;

use super::mock::ScriptedModels;
use super::EndpointBinding;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HttpMethod {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub method: HttpMethod,
    pub path: &'static str,
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth another attempt: connection failures, timeouts, 429 and 5xx.
    Retryable(String),
    Fatal(String),
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Retryable(m) | BackendError::Fatal(m) => f.write_str(m),
        }
    }
}

/// A pure request/response endpoint. Implementations must be side-effect free
/// so that retries and cache replays are safe.
pub trait Backend: Send + Sync {
    fn call(&self, binding: &EndpointBinding, request: &Request) -> Result<Value, BackendError>;
}

/// JSON over HTTP.
#[derive(Debug, Default)]
pub struct HttpBackend;

impl Backend for HttpBackend {
    fn call(&self, binding: &EndpointBinding, request: &Request) -> Result<Value, BackendError> {
        let url = format!("{}{}", binding.base_url.trim_end_matches('/'), request.path);
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(binding.timeout_secs))
            .build();
        let mut req = match request.method {
            HttpMethod::Get => agent.get(&url),
            HttpMethod::Post => agent.post(&url),
        };
        if let Some(var) = &binding.api_key_env {
            if let Ok(token) = std::env::var(var) {
                req = req.set("Authorization", &format!("Bearer {token}"));
            }
        }
        let resp = match request.method {
            HttpMethod::Get => req.call(),
            HttpMethod::Post => req.send_json(&request.body),
        };
        match resp {
            Ok(r) => r
                .into_json::<Value>()
                .map_err(|e| BackendError::Fatal(format!("{url}: invalid JSON body: {e}"))),
            Err(ureq::Error::Status(code, r)) => {
                let body = r.into_string().unwrap_or_default();
                let msg = format!("{url}: HTTP {code}: {body}");
                if code == 429 || code >= 500 {
                    Err(BackendError::Retryable(msg))
                } else {
                    Err(BackendError::Fatal(msg))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(BackendError::Retryable(format!("{url}: {t}"))),
        }
    }
}

/// Sends `mock://` bindings to the scripted models and everything else over HTTP.
pub struct DefaultBackend {
    http: HttpBackend,
    mock: ScriptedModels,
}

impl DefaultBackend {
    pub fn new(mock: ScriptedModels) -> Self {
        DefaultBackend {
            http: HttpBackend,
            mock,
        }
    }
}

impl Backend for DefaultBackend {
    fn call(&self, binding: &EndpointBinding, request: &Request) -> Result<Value, BackendError> {
        if binding.base_url.starts_with("mock://") {
            self.mock.call(binding, request)
        } else {
            self.http.call(binding, request)
        }
    }
}
