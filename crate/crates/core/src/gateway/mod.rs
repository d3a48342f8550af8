//! Typed access to every external model endpoint.
//!
//! All calls go through [`Gateway::request`], which consults the replay cache
//! first, enforces the per-endpoint in-flight budget and retries transient
//! failures with exponential backoff. Responses are validated after retrieval,
//! so a replayed transcript is checked exactly like a live one.

mod backend;
mod binding;
pub mod cache;
pub mod mock;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub use backend::{Backend, BackendError, DefaultBackend, HttpBackend, HttpMethod, Request};
pub use binding::{EndpointBinding, EndpointKind};
pub use cache::{CacheEntry, ReplayCache};

use self::binding::PerKind;
use self::cache::{cache_key, content_hash, EntryHeader};
use crate::error::{Error, Result};
use crate::text::normalized_word_tokens;
use crate::types::{AttributionMethod, AttributionResult, LabelSet, Prediction};

/// Probability-sum tolerance accepted from classifier endpoints.
pub const PROBABILITY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoredToken {
    pub token: String,
    /// `None` for a token the scorer could not condition on (the first one).
    pub logprob: Option<f64>,
}

#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Default)]
struct Counters {
    network: AtomicU64,
    cache_hits: AtomicU64,
}

pub struct GatewayBuilder {
    backend: Arc<dyn Backend>,
    cache: ReplayCache,
    labels: LabelSet,
    offline: bool,
    max_in_flight: usize,
    backoff: Duration,
}

impl GatewayBuilder {
    pub fn cache(mut self, cache: ReplayCache) -> Self {
        self.cache = cache;
        self
    }

    /// Fail on cache misses instead of calling the backend.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n;
        self
    }

    /// First retry delay; doubles on each further attempt.
    pub fn backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn build(self) -> Gateway {
        Gateway {
            backend: self.backend,
            cache: self.cache,
            labels: self.labels,
            offline: self.offline,
            backoff: self.backoff,
            limits: PerKind::from_fn(|_| Semaphore::new(self.max_in_flight)),
            counters: PerKind::default(),
            embed_dims: Mutex::new(BTreeMap::new()),
            transcript: Mutex::new(BTreeMap::new()),
        }
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: ReplayCache,
    labels: LabelSet,
    offline: bool,
    backoff: Duration,
    limits: PerKind<Semaphore>,
    counters: PerKind<Counters>,
    embed_dims: Mutex<BTreeMap<String, usize>>,
    /// Cache key to response content hash for every call made through this gateway.
    transcript: Mutex<BTreeMap<String, String>>,
}

impl Gateway {
    pub fn builder(backend: Arc<dyn Backend>, labels: LabelSet) -> GatewayBuilder {
        GatewayBuilder {
            backend,
            cache: ReplayCache::in_memory(),
            labels,
            offline: false,
            max_in_flight: 4,
            backoff: Duration::from_millis(250),
        }
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    /// Backend calls made for `kind` (cache hits excluded).
    pub fn network_calls(&self, kind: EndpointKind) -> u64 {
        self.counters.get(kind).network.load(Ordering::Relaxed)
    }

    pub fn total_network_calls(&self) -> u64 {
        EndpointKind::ALL.iter().map(|k| self.network_calls(*k)).sum()
    }

    pub fn cache_hits(&self, kind: EndpointKind) -> u64 {
        self.counters.get(kind).cache_hits.load(Ordering::Relaxed)
    }

    /// Sorted `(cache key, response hash)` pairs of every call so far.
    pub fn transcript(&self) -> Vec<(String, String)> {
        self.transcript
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Returns the transcript and starts a new one.
    pub fn take_transcript(&self) -> Vec<(String, String)> {
        std::mem::take(&mut *self.transcript.lock().unwrap())
            .into_iter()
            .collect()
    }

    /// Cached-or-live raw call.
    pub fn request(&self, binding: &EndpointBinding, request: &Request) -> Result<Value> {
        let key = cache_key(binding.kind, &binding.model_name, request.path, &request.body);
        let counters = self.counters.get(binding.kind);
        let entry = match self.cache.get(&key)? {
            Some(entry) => {
                counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                entry
            }
            None => {
                if self.offline {
                    return Err(Error::CacheMiss {
                        endpoint: binding.kind.to_string(),
                        key,
                    });
                }
                let value = self.call_with_retries(binding, request)?;
                let header = EntryHeader {
                    kind: binding.kind,
                    model_name: binding.model_name.clone(),
                    path: request.path.to_owned(),
                    created_at: cache::now_secs(),
                };
                self.cache.put(&key, header, serde_json::to_vec(&value)?)?
            }
        };
        self.transcript
            .lock()
            .unwrap()
            .insert(key, content_hash(&entry.value));
        serde_json::from_slice(&entry.value)
            .map_err(|e| Error::protocol(binding.kind, format!("cached body is not JSON: {e}")))
    }

    fn call_with_retries(&self, binding: &EndpointBinding, request: &Request) -> Result<Value> {
        let _permit = self.limits.get(binding.kind).acquire();
        let attempts = binding.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 && !self.backoff.is_zero() {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            self.counters
                .get(binding.kind)
                .network
                .fetch_add(1, Ordering::Relaxed);
            match self.backend.call(binding, request) {
                Ok(v) => return Ok(v),
                Err(BackendError::Retryable(m)) => last = m,
                Err(BackendError::Fatal(m)) => {
                    return Err(Error::Transport {
                        endpoint: binding.kind.to_string(),
                        attempts: attempt + 1,
                        message: m,
                    })
                }
            }
        }
        Err(Error::Transport {
            endpoint: binding.kind.to_string(),
            attempts,
            message: last,
        })
    }

    fn typed<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        binding: &EndpointBinding,
        method: HttpMethod,
        path: &'static str,
        body: &Req,
    ) -> Result<Resp> {
        let value = self.request(
            binding,
            &Request {
                method,
                path,
                body: serde_json::to_value(body)?,
            },
        )?;
        serde_json::from_value(value)
            .map_err(|e| Error::protocol(binding.kind, format!("{path}: unexpected response shape: {e}")))
    }

    pub fn info(&self, binding: &EndpointBinding) -> Result<wire::InfoResponse> {
        self.typed(binding, HttpMethod::Get, wire::INFO, &Value::Null)
    }

    pub fn classify(&self, binding: &EndpointBinding, text: &str) -> Result<Prediction> {
        binding.expect(EndpointKind::Classifier)?;
        let resp: wire::PredictResponse = self.typed(
            binding,
            HttpMethod::Post,
            wire::PREDICT,
            &wire::TextRequest { text: text.to_owned() },
        )?;
        if let Some(labels) = &resp.labels {
            if labels.as_slice() != self.labels.labels() {
                return Err(Error::protocol(
                    binding.kind,
                    format!("label order {labels:?} differs from run labels {:?}", self.labels.labels()),
                ));
            }
        }
        let probs = resp.probabilities;
        let sum: f64 = probs.iter().sum();
        if probs.len() != self.labels.len() || !((sum - 1.0).abs() <= PROBABILITY_TOLERANCE) {
            return Err(Error::protocol(
                binding.kind,
                format!("invalid probability vector {probs:?} (sum {sum})"),
            ));
        }
        let normalized: Vec<f64> = probs.iter().map(|p| p / sum).collect();
        Prediction::from_probabilities(&self.labels, &normalized, 1e-9)
            .map_err(|e| Error::protocol(binding.kind, e.to_string()))
    }

    pub fn embed(&self, binding: &EndpointBinding, text: &str) -> Result<Vec<f64>> {
        binding.expect(EndpointKind::Embedder)?;
        let resp: wire::EmbedResponse = self.typed(
            binding,
            HttpMethod::Post,
            wire::EMBED,
            &wire::TextRequest { text: text.to_owned() },
        )?;
        let dim = resp.embedding.len();
        if dim == 0 || resp.embedding.iter().any(|x| !x.is_finite()) {
            return Err(Error::protocol(binding.kind, "empty or non-finite embedding"));
        }
        let mut dims = self.embed_dims.lock().unwrap();
        let expected = *dims.entry(binding.model_name.clone()).or_insert(dim);
        if expected != dim {
            return Err(Error::protocol(
                binding.kind,
                format!("embedding dimension changed from {expected} to {dim}"),
            ));
        }
        Ok(resp.embedding)
    }

    /// Chat completion with the post-processing of [`clean_completion`].
    pub fn generate(&self, binding: &EndpointBinding, prompt: &str) -> Result<String> {
        let raw = self.generate_raw(binding, prompt)?;
        let cleaned = clean_completion(&raw);
        if cleaned.is_empty() {
            return Err(Error::Generation("empty completion".into()));
        }
        Ok(cleaned)
    }

    /// Chat completion text exactly as returned.
    pub fn generate_raw(&self, binding: &EndpointBinding, prompt: &str) -> Result<String> {
        binding.expect(EndpointKind::Generator)?;
        let req = wire::ChatRequest {
            model: binding.model_name.clone(),
            messages: vec![wire::ChatMessage {
                role: "user".into(),
                content: prompt.to_owned(),
            }],
            temperature: binding.temperature,
            max_tokens: binding.max_new_tokens,
        };
        let resp: wire::ChatResponse = self.typed(binding, HttpMethod::Post, wire::CHAT, &req)?;
        resp.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::protocol(binding.kind, "no choices in completion"))
    }

    /// Fails with a capability error unless the scorer advertises logprobs.
    pub fn check_scorer(&self, binding: &EndpointBinding) -> Result<()> {
        binding.expect(EndpointKind::Scorer)?;
        let info = self.info(binding)?;
        if !info.capabilities.iter().any(|c| c == "logprobs") {
            return Err(Error::Capability {
                endpoint: binding.kind.to_string(),
                message: format!("'{}' does not provide token logprobs", binding.model_name),
            });
        }
        Ok(())
    }

    pub fn token_logprobs(&self, binding: &EndpointBinding, text: &str) -> Result<Vec<ScoredToken>> {
        binding.expect(EndpointKind::Scorer)?;
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("cannot score empty text".into()));
        }
        let resp: wire::LogprobsResponse = self.typed(
            binding,
            HttpMethod::Post,
            wire::LOGPROBS,
            &wire::TextRequest { text: text.to_owned() },
        )?;
        if resp.tokens.len() != resp.logprobs.len() {
            return Err(Error::protocol(
                binding.kind,
                format!("{} tokens but {} logprobs", resp.tokens.len(), resp.logprobs.len()),
            ));
        }
        if let Some(bad) = resp.logprobs.iter().flatten().find(|lp| !(**lp <= 0.0)) {
            return Err(Error::protocol(binding.kind, format!("invalid logprob {bad}")));
        }
        Ok(resp
            .tokens
            .into_iter()
            .zip(resp.logprobs)
            .map(|(token, logprob)| ScoredToken { token, logprob })
            .collect())
    }

    pub fn attribute_remote(
        &self,
        binding: &EndpointBinding,
        text: &str,
        target_label: &str,
        method: AttributionMethod,
        ig_steps: u32,
    ) -> Result<AttributionResult> {
        binding.expect(EndpointKind::Attributor)?;
        if !method.is_remote() {
            return Err(Error::InvalidInput(format!("{method} is computed locally")));
        }
        let req = wire::AttributeRequest {
            text: text.to_owned(),
            target_label: target_label.to_owned(),
            method: method.as_str().to_owned(),
            ig_steps,
        };
        let resp: wire::AttributeResponse =
            self.typed(binding, HttpMethod::Post, wire::ATTRIBUTE, &req)?;
        for (i, w) in resp.word_alignment.iter().enumerate() {
            if w.is_none() && !resp.special_tokens.contains(&i) {
                return Err(Error::protocol(
                    binding.kind,
                    format!("token {i} ({:?}) has no word and is not a special token", resp.tokens.get(i)),
                ));
            }
        }
        let result = AttributionResult {
            method,
            tokens: resp.tokens,
            scores: resp.scores,
            word_alignment: resp.word_alignment,
            target_label: target_label.to_owned(),
            notes: Vec::new(),
        };
        result
            .validate(normalized_word_tokens(text).len())
            .map_err(|e| Error::protocol(binding.kind, e.to_string()))?;
        Ok(result)
    }
}

const EDIT_TAG: &str = "[edit input]";

/// Strips surrounding whitespace, quote wrappers and a leading `[edit input]` tag.
pub fn clean_completion(raw: &str) -> String {
    let mut s = raw.trim();
    loop {
        let before = s;
        if s.len() >= EDIT_TAG.len() && s[..EDIT_TAG.len()].eq_ignore_ascii_case(EDIT_TAG) {
            s = s[EDIT_TAG.len()..].trim_start();
        }
        for (open, close) in [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}'), ('`', '`')] {
            if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
            }
        }
        if s == before {
            return s.to_owned();
        }
    }
}
