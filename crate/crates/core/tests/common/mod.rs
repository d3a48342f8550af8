#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use fitcf_core::gateway::{Backend, BackendError, EndpointBinding, EndpointKind, Gateway, Request};
use fitcf_core::types::LabelSet;
use serde_json::Value;

type Handler = dyn Fn(&EndpointBinding, &Request) -> Result<Value, BackendError> + Send + Sync;

/// A backend answering with a closure and logging every request.
pub struct Stub {
    handler: Box<Handler>,
    calls: AtomicU64,
    log: Mutex<Vec<(EndpointKind, String, Value)>>,
}

impl Stub {
    pub fn new(f: impl Fn(&EndpointBinding, &Request) -> Result<Value, BackendError> + Send + Sync + 'static) -> Arc<Self> {
        Arc::new(Stub {
            handler: Box::new(f),
            calls: AtomicU64::new(0),
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<(EndpointKind, String, Value)> {
        self.log.lock().unwrap().clone()
    }

    /// Prompts sent to the generator, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.requests()
            .into_iter()
            .filter(|(k, _, _)| *k == EndpointKind::Generator)
            .map(|(_, _, body)| body["messages"][0]["content"].as_str().unwrap().to_owned())
            .collect()
    }

    pub fn calls_to(&self, kind: EndpointKind) -> usize {
        self.requests().iter().filter(|(k, _, _)| *k == kind).count()
    }
}

impl Backend for Stub {
    fn call(&self, binding: &EndpointBinding, request: &Request) -> Result<Value, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log
            .lock()
            .unwrap()
            .push((binding.kind, request.path.to_owned(), request.body.clone()));
        (self.handler)(binding, request)
    }
}

pub fn sentiment() -> LabelSet {
    LabelSet::new("SST2", ["negative", "positive"]).unwrap()
}

pub fn ag_news() -> LabelSet {
    LabelSet::new("AG News", ["world", "sports", "business", "sci/tech"]).unwrap()
}

pub fn gateway(stub: &Arc<Stub>, labels: LabelSet) -> Gateway {
    Gateway::builder(stub.clone(), labels).backoff(Duration::ZERO).build()
}

pub fn binding(kind: EndpointKind) -> EndpointBinding {
    EndpointBinding::new(kind, "http://stub", format!("{kind}-model"))
}

pub fn text_of(req: &Request) -> String {
    req.body["text"].as_str().unwrap_or_default().to_owned()
}

pub fn chat(content: &str) -> Value {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
}
