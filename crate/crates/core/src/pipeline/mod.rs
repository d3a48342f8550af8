//! ZeroCF, FitCF and FIZLE generation, label-flip verification, demonstration
//! construction and whole-run orchestration.

mod ablation;
mod demos;
mod experiment;
mod faith;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use sha2::{Digest, Sha256};

pub use ablation::{run_ablation, AblationCell, AblationResult, AblationRun};
pub use demos::DemonstrationPool;
pub use experiment::{run_experiment, write_run, DemonstrationSummary, RunOutput, RunReport, DEGRADED_FAILURE_RATE};

use crate::attribution::{
    extract_important_words, kernel_shap_attribute, lime_attribute, occlusion_attribute, RemoteClassifier,
    TextClassifier,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gateway::mock::ScriptedModels;
use crate::gateway::{DefaultBackend, EndpointBinding, EndpointKind, Gateway, ReplayCache};
use crate::prompts::{base_vars, format_demonstrations, python_list_repr, PromptSet, PromptTemplate};
use crate::text::normalized_word_tokens;
use crate::types::{
    AttributionMethod, AttributionResult, CounterfactualRecord, Demonstration, FlipStatus, GenerationMethod,
    ImportantWords, Instance, LabelSet, Prediction,
};

/// Longest item, in words, accepted from a FIZLE word list.
pub const MAX_PROPOSED_WORD_TOKENS: usize = 3;

/// Accepted iff the classifier's argmax differs between the two texts.
/// A blank counterfactual is rejected without consulting the classifier.
pub fn verify_flip<C: TextClassifier + ?Sized>(original: &str, counterfactual: &str, classifier: &C) -> Result<FlipStatus> {
    if counterfactual.trim().is_empty() {
        return Ok(FlipStatus::Rejected);
    }
    let a = classifier.predict(original)?;
    let b = classifier.predict(counterfactual)?;
    Ok(if a.label != b.label {
        FlipStatus::Accepted
    } else {
        FlipStatus::Rejected
    })
}

/// Target label named in the few-shot prompt: the other label of a binary
/// task, otherwise the second most probable label.
pub fn counterpart_label(prediction: &Prediction, labels: &LabelSet) -> String {
    if labels.len() == 2 {
        return labels
            .labels()
            .iter()
            .find(|l| **l != prediction.label)
            .cloned()
            .expect("two distinct labels");
    }
    prediction.ranked_labels()[1].to_owned()
}

/// Splits a generated word list on commas and newlines, dropping list
/// markers and quotes. Items longer than [`MAX_PROPOSED_WORD_TOKENS`] words
/// mean the reply was not a list.
pub fn parse_word_list(reply: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for raw in reply.split([',', '\n', ';']) {
        let item = raw
            .trim()
            .trim_start_matches(|c: char| c == '-' || c == '*' || c == '•' || c.is_ascii_digit() || c == '.' || c == ')')
            .trim()
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '[' || c == ']')
            .trim();
        if item.is_empty() {
            continue;
        }
        if item.split_whitespace().count() > MAX_PROPOSED_WORD_TOKENS {
            return Err(Error::Generation(format!("cannot read a word list from: {reply:?}")));
        }
        if !out.iter().any(|w| w.eq_ignore_ascii_case(item)) {
            out.push(item.to_owned());
        }
    }
    Ok(out)
}

fn bare(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Proposed words that do not occur in `text` as a run of whole words
/// (case-insensitive, ignoring surrounding punctuation).
pub fn hallucinated_words(proposed: &[String], text: &str) -> Vec<String> {
    let words: Vec<String> = normalized_word_tokens(text).iter().map(|w| bare(w)).collect();
    proposed
        .iter()
        .filter(|p| {
            let needle: Vec<String> = p.split_whitespace().map(bare).collect();
            needle.is_empty() || !words.windows(needle.len()).any(|w| w == needle.as_slice())
        })
        .cloned()
        .collect()
}

fn same_words(a: &str, b: &str) -> bool {
    normalized_word_tokens(a) == normalized_word_tokens(b)
}

/// Per-instance seed derived from the run seed and the instance id.
pub fn instance_seed(run_seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// A gateway for `config`: HTTP for real URLs, scripted models for `mock://`.
pub fn default_gateway(config: &RunConfig, cache: ReplayCache, offline: bool) -> Result<Gateway> {
    let labels = config.label_set()?;
    let backend = DefaultBackend::new(ScriptedModels::new(labels.clone()));
    Ok(Gateway::builder(Arc::new(backend), labels)
        .cache(cache)
        .offline(offline || config.runtime.offline)
        .max_in_flight(config.runtime.max_in_flight)
        .build())
}

/// Everything a run needs: configuration, prompts and the shared gateway.
pub struct Engine<'g> {
    pub config: RunConfig,
    pub labels: LabelSet,
    pub prompts: PromptSet,
    gateway: &'g Gateway,
    attribution_calls: AtomicU64,
    verify_calls: AtomicU64,
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn stage<T>(name: &'static str, r: Result<T>) -> Staged<T> {
    r.map_err(|e| (name, e))
}

impl<'g> Engine<'g> {
    pub fn new(config: RunConfig, gateway: &'g Gateway) -> Result<Self> {
        config.validate()?;
        let labels = config.label_set()?;
        if gateway.labels() != &labels {
            return Err(Error::InvalidInput("gateway label set differs from the config".into()));
        }
        let prompts = PromptSet::with_overrides(&config.prompts, &config.base_dir)?;
        Ok(Engine {
            config,
            labels,
            prompts,
            gateway,
            attribution_calls: AtomicU64::new(0),
            verify_calls: AtomicU64::new(0),
        })
    }

    pub fn gateway(&self) -> &'g Gateway {
        self.gateway
    }

    pub fn binding(&self, kind: EndpointKind) -> Result<&EndpointBinding> {
        self.config.endpoints.require(kind)
    }

    pub fn classifier(&self) -> Result<RemoteClassifier<'_>> {
        Ok(RemoteClassifier {
            gateway: self.gateway,
            binding: self.binding(EndpointKind::Classifier)?,
        })
    }

    /// Attributions computed so far (native or remote).
    pub fn attribution_calls(&self) -> u64 {
        self.attribution_calls.load(Ordering::Relaxed)
    }

    /// Flip verifications performed so far.
    pub fn verify_calls(&self) -> u64 {
        self.verify_calls.load(Ordering::Relaxed)
    }

    fn generator_model(&self) -> String {
        self.config
            .endpoints
            .generator
            .as_ref()
            .map(|g| g.model_name.clone())
            .unwrap_or_default()
    }

    pub fn attribute(&self, text: &str, target_label: &str, method: AttributionMethod, seed: u64) -> Result<AttributionResult> {
        self.attribution_calls.fetch_add(1, Ordering::Relaxed);
        let clf = self.classifier()?;
        match method {
            AttributionMethod::Lime => lime_attribute(text, target_label, &clf, &self.config.lime.to_config(), seed),
            AttributionMethod::Shap => kernel_shap_attribute(text, target_label, &clf, &self.config.shap.to_config(), seed),
            AttributionMethod::Occlusion => occlusion_attribute(text, target_label, &clf),
            AttributionMethod::Gradient | AttributionMethod::IntegratedGradients => self.gateway.attribute_remote(
                self.binding(EndpointKind::Attributor)?,
                text,
                target_label,
                method,
                self.config.runtime.ig_steps,
            ),
        }
    }

    pub fn verify(&self, original: &str, counterfactual: &str) -> Result<FlipStatus> {
        self.verify_calls.fetch_add(1, Ordering::Relaxed);
        verify_flip(original, counterfactual, &self.classifier()?)
    }

    fn render(&self, template: &PromptTemplate, extra: &[(&'static str, String)]) -> Result<String> {
        let mut vars: BTreeMap<&str, String> = base_vars(&self.labels);
        vars.extend(extra.iter().cloned());
        template.render(&vars)
    }

    fn generate(&self, prompt: &str) -> Result<String> {
        self.gateway.generate(self.binding(EndpointKind::Generator)?, prompt)
    }

    /// Classification plus (unless ablated) important-word extraction.
    fn explain(&self, instance: &Instance, rec: &mut CounterfactualRecord) -> Staged<(Prediction, ImportantWords)> {
        let method = self.config.attribution_method.expect("validated");
        rec.attribution_method = Some(method);
        let prediction = stage("classify", self.classifier().and_then(|c| c.predict(&instance.text)))?;
        rec.predicted_label = prediction.label.clone();
        if !self.config.include_important_words {
            return Ok((prediction, ImportantWords::default()));
        }
        let seed = instance_seed(self.config.seed, &instance.id);
        let attr = stage("attribute", self.attribute(&instance.text, &prediction.label, method, seed))?;
        rec.notes.extend(attr.notes.iter().cloned());
        let words = stage(
            "important-words",
            extract_important_words(&attr, &instance.text, self.config.num_important_words),
        )?;
        rec.important_words = Some(words.clone());
        Ok((prediction, words))
    }

    fn finish_generation(&self, rec: &mut CounterfactualRecord, prompt: Result<String>) -> Staged<()> {
        let prompt = stage("prompt", prompt)?;
        let text = stage("generate", self.generate(&prompt))?;
        rec.no_edit = same_words(&text, &rec.instance.text);
        rec.counterfactual_text = text;
        Ok(())
    }

    /// Zero-shot generation guided by the classifier's important words.
    pub fn zerocf_generate(&self, instance: &Instance) -> CounterfactualRecord {
        let mut rec = CounterfactualRecord::started(instance, GenerationMethod::Zerocf, &self.generator_model());
        match self.zerocf_inner(instance, &mut rec) {
            Ok(()) => rec,
            Err((s, e)) => rec.fail(s, &e),
        }
    }

    fn zerocf_inner(&self, instance: &Instance, rec: &mut CounterfactualRecord) -> Staged<()> {
        let (prediction, words) = self.explain(instance, rec)?;
        let prompt = self.render(
            &self.prompts.zerocf,
            &[
                ("prediction", prediction.label),
                ("important_words", python_list_repr(&words.words)),
                ("input_text", instance.text.clone()),
            ],
        );
        self.finish_generation(rec, prompt)
    }

    /// Few-shot generation from verified demonstrations; the result is flip-verified.
    pub fn fitcf_generate(&self, instance: &Instance, demonstrations: &[Demonstration]) -> CounterfactualRecord {
        let mut rec = CounterfactualRecord::started(instance, GenerationMethod::Fitcf, &self.generator_model());
        match self.fitcf_inner(instance, demonstrations, &mut rec) {
            Ok(()) => rec,
            Err((s, e)) => rec.fail(s, &e),
        }
    }

    fn fitcf_inner(&self, instance: &Instance, demos: &[Demonstration], rec: &mut CounterfactualRecord) -> Staged<()> {
        if demos.is_empty() {
            return Err(("demonstrations", Error::Degraded("no demonstrations available".into())));
        }
        let (prediction, words) = self.explain(instance, rec)?;
        let counterpart = counterpart_label(&prediction, &self.labels);
        rec.counterpart_label = Some(counterpart.clone());
        let prompt = self.render(
            &self.prompts.fitcf,
            &[
                ("prediction", prediction.label.clone()),
                ("counterpart", counterpart),
                ("important_words", python_list_repr(&words.words)),
                ("demonstrations", format_demonstrations(demos)),
                ("input_text", instance.text.clone()),
            ],
        );
        self.finish_generation(rec, prompt)?;
        rec.flip_verified = stage("verify", self.verify(&instance.text, &rec.counterfactual_text))?;
        Ok(())
    }

    /// The generator proposes the important words itself, then edits with them.
    pub fn fizle_generate(&self, instance: &Instance) -> CounterfactualRecord {
        let mut rec = CounterfactualRecord::started(instance, GenerationMethod::Fizle, &self.generator_model());
        match self.fizle_inner(instance, &mut rec) {
            Ok(()) => rec,
            Err((s, e)) => rec.fail(s, &e),
        }
    }

    fn fizle_inner(&self, instance: &Instance, rec: &mut CounterfactualRecord) -> Staged<()> {
        let prediction = stage("classify", self.classifier().and_then(|c| c.predict(&instance.text)))?;
        rec.predicted_label = prediction.label.clone();
        let ask = stage(
            "prompt",
            self.render(
                &self.prompts.fizle_words,
                &[("prediction", prediction.label.clone()), ("input_text", instance.text.clone())],
            ),
        )?;
        let generator = stage("word-extraction", self.binding(EndpointKind::Generator))?;
        let reply = stage("word-extraction", self.gateway.generate_raw(generator, &ask))?;
        let words = stage("word-extraction", parse_word_list(&reply))?;
        if words.is_empty() {
            rec.notes.push("generator proposed no words".into());
        }
        rec.hallucinated_words = Some(hallucinated_words(&words, &instance.text));
        rec.proposed_words = Some(words.clone());
        let prompt = self.render(
            &self.prompts.fizle_edit,
            &[
                ("prediction", prediction.label),
                ("important_words", python_list_repr(&words)),
                ("input_text", instance.text.clone()),
            ],
        );
        self.finish_generation(rec, prompt)
    }
}
