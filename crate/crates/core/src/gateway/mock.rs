//! Deterministic scripted models behind `mock://` endpoints.
//!
//! A lexicon classifier, a hashed bag-of-words embedder, a hash-based scorer,
//! a lexicon attributor with BERT-style `[CLS]`/`##` tokens, and an antonym
//! swapping "LLM" that understands the pipeline's prompts. Used for offline
//! runs, the toy corpus and tests.

use std::collections::{BTreeMap, HashSet};

use serde_json::Value;

use super::backend::{BackendError, Request};
use super::wire::{self, ChatRequest, ChatResponse};
use super::{EndpointBinding, EndpointKind};
use crate::types::LabelSet;

const HASH_DIMS: usize = 6;

const POSITIVE: &[&str] = &[
    "good", "great", "love", "loved", "wonderful", "best", "fun", "brilliant", "happy",
    "beautiful", "excellent", "charming", "delightful", "enjoyable", "moving",
];
const NEGATIVE: &[&str] = &[
    "bad", "terrible", "hate", "hated", "awful", "worst", "boring", "dull", "sad", "ugly",
    "poor", "tedious", "mess", "painful", "forgettable",
];
const WORLD: &[&str] = &["war", "government", "minister", "election", "troops", "president"];
const SPORTS: &[&str] = &["game", "team", "season", "coach", "league", "match"];
const BUSINESS: &[&str] = &["market", "stocks", "company", "profit", "shares", "bank"];
const SCITECH: &[&str] = &["software", "internet", "computer", "apple", "space", "research"];

const ANTONYMS: &[(&str, &str)] = &[
    ("good", "bad"),
    ("great", "terrible"),
    ("love", "hate"),
    ("loved", "hated"),
    ("wonderful", "awful"),
    ("best", "worst"),
    ("fun", "boring"),
    ("brilliant", "dull"),
    ("happy", "sad"),
    ("beautiful", "ugly"),
    ("excellent", "poor"),
    ("delightful", "tedious"),
    ("enjoyable", "painful"),
    ("moving", "forgettable"),
    ("game", "market"),
    ("team", "company"),
    ("software", "government"),
    ("war", "match"),
];

fn lexicon_for(label: &str) -> &'static [&'static str] {
    match label.to_lowercase().as_str() {
        "positive" | "pos" => POSITIVE,
        "negative" | "neg" => NEGATIVE,
        "world" => WORLD,
        "sports" => SPORTS,
        "business" => BUSINESS,
        "sci/tech" | "scitech" | "sci_tech" => SCITECH,
        _ => &[],
    }
}

fn antonym(word: &str) -> Option<&'static str> {
    ANTONYMS.iter().find_map(|&(a, b)| {
        if a == word {
            Some(b)
        } else if b == word {
            Some(a)
        } else {
            None
        }
    })
}

pub(crate) fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Lowercased word with surrounding punctuation removed.
fn core(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

#[derive(Debug, Clone)]
pub struct ScriptedModels {
    labels: LabelSet,
}

impl ScriptedModels {
    pub fn new(labels: LabelSet) -> Self {
        ScriptedModels { labels }
    }

    pub fn call(&self, binding: &EndpointBinding, req: &Request) -> Result<Value, BackendError> {
        let bad = |m: String| BackendError::Fatal(format!("mock {}: {m}", binding.kind));
        let text = || -> Result<String, BackendError> {
            req.body
                .get("text")
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| bad("missing text".into()))
        };
        let out = match (binding.kind, req.path) {
            (_, wire::INFO) => serde_json::to_value(self.info(&binding.model_name)),
            (EndpointKind::Classifier, wire::PREDICT) => {
                let t = text()?;
                serde_json::to_value(wire::PredictResponse {
                    labels: Some(self.labels.labels().to_vec()),
                    probabilities: self.probabilities(&t),
                    truncated: false,
                    empty: t.trim().is_empty(),
                })
            }
            (EndpointKind::Embedder, wire::EMBED) => serde_json::to_value(wire::EmbedResponse {
                embedding: self.embedding(&text()?),
            }),
            (EndpointKind::Scorer, wire::LOGPROBS) => serde_json::to_value(self.logprobs(&text()?)),
            (EndpointKind::Attributor, wire::ATTRIBUTE) => {
                let r: wire::AttributeRequest =
                    serde_json::from_value(req.body.clone()).map_err(|e| bad(e.to_string()))?;
                if !self.labels.contains(&r.target_label) {
                    return Err(bad(format!("unknown label {}", r.target_label)));
                }
                serde_json::to_value(self.attribute(&r)?)
            }
            (EndpointKind::Generator, wire::CHAT) => {
                let r: ChatRequest =
                    serde_json::from_value(req.body.clone()).map_err(|e| bad(e.to_string()))?;
                let prompt = r.messages.last().map(|m| m.content.as_str()).unwrap_or("");
                serde_json::to_value(ChatResponse::single(self.chat(prompt)))
            }
            (kind, path) => return Err(bad(format!("{path} is not served to {kind} bindings"))),
        };
        out.map_err(|e| bad(e.to_string()))
    }

    fn info(&self, model_name: &str) -> wire::InfoResponse {
        let mut models = BTreeMap::new();
        models.insert(model_name.to_owned(), format!("mock:{:016x}", fnv1a(model_name)));
        wire::InfoResponse {
            labels: self.labels.labels().to_vec(),
            embedding_dim: HASH_DIMS + self.labels.len(),
            max_length: 512,
            capabilities: ["predict", "embed", "logprobs", "attribute"]
                .map(String::from)
                .to_vec(),
            models,
        }
    }

    fn label_counts(&self, text: &str) -> Vec<f64> {
        let words: Vec<String> = text.split_whitespace().map(core).collect();
        self.labels
            .labels()
            .iter()
            .map(|l| {
                let lex = lexicon_for(l);
                words.iter().filter(|w| lex.contains(&w.as_str())).count() as f64
            })
            .collect()
    }

    /// Softmax over 1.5 times the per-label lexicon hit counts.
    pub fn probabilities(&self, text: &str) -> Vec<f64> {
        let logits: Vec<f64> = self.label_counts(text).iter().map(|c| 1.5 * c).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.iter().map(|e| e / z).collect()
    }

    pub fn predicted_label(&self, text: &str) -> &str {
        let p = self.probabilities(text);
        let mut best = 0;
        for i in 1..p.len() {
            if p[i] > p[best] {
                best = i;
            }
        }
        &self.labels.labels()[best]
    }

    fn embedding(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; HASH_DIMS];
        for w in text.split_whitespace().map(core) {
            let h = fnv1a(&w);
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            v[(h >> 1) as usize % HASH_DIMS] += sign * 0.25;
        }
        v.extend(self.label_counts(text).iter().map(|c| 2.0 * c));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    fn logprobs(&self, text: &str) -> wire::LogprobsResponse {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
        let logprobs = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (i > 0).then(|| -(1.0 + (fnv1a(&core(t)) % 50) as f64 / 10.0))
            })
            .collect();
        wire::LogprobsResponse { tokens, logprobs }
    }

    fn attribute(&self, r: &wire::AttributeRequest) -> Result<wire::AttributeResponse, BackendError> {
        let signed = match r.method.as_str() {
            "gradient" => false,
            "integrated_gradients" => true,
            m => return Err(BackendError::Fatal(format!("unknown method {m}"))),
        };
        let target = lexicon_for(&r.target_label);
        let others: Vec<&str> = self
            .labels
            .labels()
            .iter()
            .filter(|l| **l != r.target_label)
            .flat_map(|l| lexicon_for(l).iter().copied())
            .collect();
        let word_score = |w: &str| {
            let base = (fnv1a(w) % 10) as f64 / 100.0;
            if target.contains(&w) {
                1.0 + base
            } else if others.contains(&w) {
                if signed {
                    -1.0 - base
                } else {
                    0.8 + base
                }
            } else {
                base
            }
        };
        let mut resp = wire::AttributeResponse {
            tokens: vec!["[CLS]".into()],
            scores: vec![if signed { 0.0 } else { 2.0 }],
            word_alignment: vec![None],
            special_tokens: vec![0],
        };
        let nfc: Vec<String> = crate::text::normalized_word_tokens(&r.text);
        for (wi, w) in nfc.iter().enumerate() {
            let c = core(w);
            let s = word_score(&c);
            let chars: Vec<char> = c.chars().collect();
            if chars.len() > 6 {
                let head: String = chars[..4].iter().collect();
                let tail: String = chars[4..].iter().collect();
                resp.tokens.push(head);
                resp.scores.push(s * 0.5);
                resp.tokens.push(format!("##{tail}"));
                resp.scores.push(s);
                resp.word_alignment.extend([Some(wi), Some(wi)]);
            } else {
                resp.tokens.push(if c.is_empty() { w.clone() } else { c });
                resp.scores.push(s);
                resp.word_alignment.push(Some(wi));
            }
        }
        resp.special_tokens.push(resp.tokens.len());
        resp.tokens.push("[SEP]".into());
        resp.scores.push(if signed { 0.0 } else { 1.5 });
        resp.word_alignment.push(None);
        Ok(resp)
    }

    fn chat(&self, prompt: &str) -> String {
        if prompt.contains("Respond with 'yes' if they are different") {
            return self.judge(prompt);
        }
        if prompt.contains("list the important words") {
            return self.propose_words(prompt);
        }
        self.edit(prompt)
    }

    fn judge(&self, prompt: &str) -> String {
        let grab = |tag: &str| {
            prompt
                .lines()
                .find_map(|l| l.strip_prefix(tag))
                .map(|s| s.trim().trim_matches('\'').to_owned())
        };
        match (grab("[original instance] "), grab("[edited instance] ")) {
            (Some(a), Some(b)) => {
                if self.predicted_label(&a) != self.predicted_label(&b) {
                    "Yes.".into()
                } else {
                    "no".into()
                }
            }
            _ => "I cannot tell.".into(),
        }
    }

    fn propose_words(&self, prompt: &str) -> String {
        let input = last_after(prompt, "Input: ").unwrap_or_default();
        let mut seen = HashSet::new();
        let mut words: Vec<String> = Vec::new();
        for w in input.split_whitespace().map(core) {
            let known = self.labels.labels().iter().any(|l| lexicon_for(l).contains(&w.as_str()));
            if known && seen.insert(w.clone()) {
                words.push(w);
            }
        }
        if let Some(first) = words.first().and_then(|w| antonym(w)) {
            words.push(first.to_owned());
        }
        words.join(", ")
    }

    /// Zero-shot: swap the antonym-able important words (only the first
    /// antonym-able word when none are given). Few-shot: the edit budget grows
    /// with demonstrations that really flip and shrinks with ones that do
    /// not; important words are swapped first, then words in text order.
    fn edit(&self, prompt: &str) -> String {
        let few_shot = prompt.contains("[original input]");
        let input = if few_shot {
            last_after(prompt, "[original input] ")
        } else {
            last_after(prompt, "Input: ")
        }
        .unwrap_or_default();
        let important: Vec<String> = prompt
            .lines()
            .find_map(|l| l.split_once(" might be important words"))
            .map(|(list, _)| parse_list_repr(list))
            .unwrap_or_default();
        let words: Vec<&str> = input.split_whitespace().collect();
        let cores: Vec<String> = words.iter().map(|w| core(w)).collect();
        let swappable = |i: &usize| antonym(&cores[*i]).is_some();
        let mut order: Vec<usize> = Vec::new();
        for imp in &important {
            for (i, core) in cores.iter().enumerate().take(words.len()) {
                if core == imp && swappable(&i) && !order.contains(&i) {
                    order.push(i);
                }
            }
        }
        let budget = if few_shot {
            let (clean, dirty) = self.demonstration_quality(prompt);
            for i in 0..words.len() {
                if swappable(&i) && !order.contains(&i) {
                    order.push(i);
                }
            }
            (1 + clean / 2).saturating_sub(dirty).max(1)
        } else if important.is_empty() {
            order.extend((0..words.len()).filter(swappable).take(1));
            1
        } else {
            usize::MAX
        };
        order.truncate(budget);
        let edited: Vec<String> = words
            .iter()
            .enumerate()
            .map(|(i, w)| match antonym(&cores[i]) {
                Some(ant) if order.contains(&i) => replace_core(w, &cores[i], ant),
                _ => (*w).to_owned(),
            })
            .collect();
        let edited = edited.join(" ");
        if few_shot {
            format!("[edit input] {edited}")
        } else {
            edited
        }
    }

    /// Counts demonstration pairs in a few-shot prompt whose label does and
    /// does not change under the lexicon classifier.
    fn demonstration_quality(&self, prompt: &str) -> (usize, usize) {
        let lines: Vec<&str> = prompt.lines().collect();
        let (mut clean, mut dirty) = (0, 0);
        for pair in lines.windows(2) {
            if let (Some(a), Some(b)) = (pair[0].strip_prefix("[original input] "), pair[1].strip_prefix("[edit input] ")) {
                if self.predicted_label(a) != self.predicted_label(b) {
                    clean += 1;
                } else {
                    dirty += 1;
                }
            }
        }
        (clean, dirty)
    }
}

fn last_after(prompt: &str, tag: &str) -> Option<String> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix(tag))
        .next_back()
        .map(|s| s.trim().to_owned())
}

fn parse_list_repr(s: &str) -> Vec<String> {
    s.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|w| core(w.trim().trim_matches('\'')))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Replaces the alphanumeric core of `word`, keeping punctuation and an initial capital.
fn replace_core(word: &str, core_lower: &str, with: &str) -> String {
    let start = word.find(|c: char| c.is_alphanumeric()).unwrap_or(0);
    let end = word
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + word[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(word.len());
    let original = &word[start..end];
    let mut replacement = with.to_owned();
    if original.chars().next().is_some_and(char::is_uppercase) && original.to_lowercase() == core_lower {
        let mut cs = replacement.chars();
        replacement = cs
            .next()
            .map(|f| f.to_uppercase().chain(cs).collect())
            .unwrap_or_default();
    }
    format!("{}{}{}", &word[..start], replacement, &word[end..])
}

impl super::Backend for ScriptedModels {
    fn call(&self, binding: &EndpointBinding, req: &Request) -> Result<Value, BackendError> {
        ScriptedModels::call(self, binding, req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> ScriptedModels {
        ScriptedModels::new(LabelSet::new("sst2", ["negative", "positive"]).unwrap())
    }

    #[test]
    fn classifier_follows_lexicon() {
        let m = models();
        assert_eq!(m.predicted_label("a great and fun movie"), "positive");
        assert_eq!(m.predicted_label("a dull mess"), "negative");
        let p = m.probabilities("");
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn editor_swaps_important_words() {
        let m = models();
        let prompt = "['great'] might be important words leading to the 'positive' category.\n\nInput: A great, fun film.";
        assert_eq!(m.edit(prompt), "A terrible, fun film.");
        let few = "['great'] might be important words\n[original input] Great fun.\n[edit input]";
        assert_eq!(m.edit(few), "[edit input] Terrible fun.");
        let demos = "[original input] good\n[edit input] bad\n\n[original input] fun\n[edit input] boring\n\n";
        let two_clean = format!("[] might be important words\n{demos}[original input] Great fun.\n[edit input]");
        assert_eq!(m.edit(&two_clean), "[edit input] Terrible boring.");
        let dirty = format!("[] might be important words\n{demos}[original input] x\n[edit input] y\n\n[original input] Great fun.\n[edit input]");
        assert_eq!(m.edit(&dirty), "[edit input] Terrible fun.");
    }

    #[test]
    fn judge_compares_lexicon_labels() {
        let m = models();
        let p = "Respond with 'yes' if they are different.\n[original instance] 'great'\n[edited instance] 'awful'";
        assert_eq!(m.chat(p), "Yes.");
    }
}
