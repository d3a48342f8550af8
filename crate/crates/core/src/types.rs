//! Domain value types shared across the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One dataset record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
}

impl Instance {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let instance = Instance {
            id: id.into(),
            text: text.into(),
            gold_label: None,
        };
        instance.check()?;
        Ok(instance)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.gold_label = Some(label.into());
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "instance '{}' has empty text",
                self.id
            )));
        }
        Ok(())
    }
}

/// The ordered label names of a task. Order is fixed for a run because
/// prompts and classifier responses are interpreted positionally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelSetRepr", into = "LabelSetRepr")]
pub struct LabelSet {
    labels: Vec<String>,
    dataset_name: String,
}

#[derive(Serialize, Deserialize)]
struct LabelSetRepr {
    labels: Vec<String>,
    dataset_name: String,
}

impl TryFrom<LabelSetRepr> for LabelSet {
    type Error = Error;

    fn try_from(r: LabelSetRepr) -> Result<Self> {
        LabelSet::new(r.dataset_name, r.labels)
    }
}

impl From<LabelSet> for LabelSetRepr {
    fn from(l: LabelSet) -> Self {
        LabelSetRepr {
            labels: l.labels,
            dataset_name: l.dataset_name,
        }
    }
}

impl LabelSet {
    pub fn new<S: Into<String>>(
        dataset_name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a label set needs at least 2 labels, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidInput(format!("duplicate label '{l}'")));
            }
        }
        Ok(LabelSet {
            labels,
            dataset_name: dataset_name.into(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dataset_name(&self) -> &str {
        &self.dataset_name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// Labels joined the way the prompts list them.
    pub fn joined(&self) -> String {
        self.labels.join(", ")
    }
}

/// A classifier output: a full distribution over the label set plus its argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    /// `(label, probability)` in label-set order.
    pub probabilities: Vec<(String, f64)>,
}

impl Prediction {
    /// Builds a prediction from a probability vector in label-set order.
    /// Ties for the argmax resolve to the earlier label.
    pub fn from_probabilities(labels: &LabelSet, probs: &[f64], tolerance: f64) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} probabilities, got {}",
                labels.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput(format!(
                "probabilities must be finite and non-negative: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        let best = argmax(probs);
        Ok(Prediction {
            label: labels.labels()[best].clone(),
            probabilities: labels
                .labels()
                .iter()
                .cloned()
                .zip(probs.iter().copied())
                .collect(),
        })
    }

    pub fn prob(&self, label: &str) -> f64 {
        self.probabilities
            .iter()
            .find(|(l, _)| l == label)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Labels ordered by descending probability, ties by label-set order.
    pub fn ranked_labels(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.probabilities.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probabilities[b]
                .1
                .total_cmp(&self.probabilities[a].1)
                .then(a.cmp(&b))
        });
        idx.into_iter()
            .map(|i| self.probabilities[i].0.as_str())
            .collect()
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    Gradient,
    IntegratedGradients,
    Lime,
    Shap,
    Occlusion,
}

impl AttributionMethod {
    pub const ALL: [AttributionMethod; 5] = [
        AttributionMethod::Gradient,
        AttributionMethod::IntegratedGradients,
        AttributionMethod::Lime,
        AttributionMethod::Shap,
        AttributionMethod::Occlusion,
    ];

    /// Gradient-family methods need model internals and are served remotely.
    pub fn is_remote(self) -> bool {
        matches!(
            self,
            AttributionMethod::Gradient | AttributionMethod::IntegratedGradients
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributionMethod::Gradient => "gradient",
            AttributionMethod::IntegratedGradients => "integrated_gradients",
            AttributionMethod::Lime => "lime",
            AttributionMethod::Shap => "shap",
            AttributionMethod::Occlusion => "occlusion",
        }
    }
}

impl fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AttributionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttributionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown attribution method '{s}'")))
    }
}

/// Per-token importance scores plus the token-to-word alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub method: AttributionMethod,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
    /// Word index in `normalized_word_tokens(text)` for each token; `None`
    /// marks a special token that belongs to no word.
    pub word_alignment: Vec<Option<usize>>,
    pub target_label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AttributionResult {
    /// Word-level result where token i is word i.
    pub fn from_word_scores(
        method: AttributionMethod,
        words: &[String],
        scores: Vec<f64>,
        target_label: &str,
    ) -> Self {
        AttributionResult {
            method,
            tokens: words.to_vec(),
            word_alignment: (0..scores.len()).map(Some).collect(),
            scores,
            target_label: target_label.to_owned(),
            notes: Vec::new(),
        }
    }

    pub fn validate(&self, word_count: usize) -> Result<()> {
        if self.scores.len() != self.tokens.len() {
            return Err(Error::InvalidInput(format!(
                "{} scores for {} tokens",
                self.scores.len(),
                self.tokens.len()
            )));
        }
        if self.word_alignment.len() != self.tokens.len() {
            return Err(Error::InvalidInput(format!(
                "word alignment covers {} of {} tokens",
                self.word_alignment.len(),
                self.tokens.len()
            )));
        }
        if let Some(bad) = self.word_alignment.iter().flatten().find(|&&w| w >= word_count) {
            return Err(Error::InvalidInput(format!(
                "token aligned to word {bad}, text has {word_count} words"
            )));
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite attribution score".into()));
        }
        Ok(())
    }
}

/// Top-attributed words taken verbatim from the source text.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImportantWords {
    pub words: Vec<String>,
    pub source_scores: Vec<f64>,
}

impl ImportantWords {
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMethod {
    Zerocf,
    Fitcf,
    Fizle,
}

impl GenerationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GenerationMethod::Zerocf => "zerocf",
            GenerationMethod::Fitcf => "fitcf",
            GenerationMethod::Fizle => "fizle",
        }
    }
}

impl fmt::Display for GenerationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipStatus {
    Accepted,
    Rejected,
    Unverified,
}

/// Where a record's generation stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub instance: Instance,
    pub predicted_label: String,
    pub counterfactual_text: String,
    pub method: GenerationMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribution_method: Option<AttributionMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub important_words: Option<ImportantWords>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart_label: Option<String>,
    pub flip_verified: FlipStatus,
    pub generator_model: String,
    /// Generator returned the input unchanged.
    #[serde(default)]
    pub no_edit: bool,
    /// FIZLE only: the words the generator proposed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_words: Option<Vec<String>>,
    /// FIZLE only: proposed words that do not occur in the input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hallucinated_words: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CounterfactualRecord {
    pub(crate) fn started(
        instance: &Instance,
        method: GenerationMethod,
        generator_model: &str,
    ) -> Self {
        CounterfactualRecord {
            instance: instance.clone(),
            predicted_label: String::new(),
            counterfactual_text: String::new(),
            method,
            attribution_method: None,
            important_words: None,
            counterpart_label: None,
            flip_verified: FlipStatus::Unverified,
            generator_model: generator_model.to_owned(),
            no_edit: false,
            proposed_words: None,
            hallucinated_words: None,
            failure: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn fail(mut self, stage: &str, err: &Error) -> Self {
        self.failure = Some(StageFailure {
            stage: stage.to_owned(),
            message: err.to_string(),
        });
        self
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && !self.counterfactual_text.is_empty()
    }
}

/// A verified (original, edited) pair used as a few-shot example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub instance_id: String,
    pub original_text: String,
    pub edited_text: String,
    pub cluster_id: usize,
    /// 0 is the member closest to the centroid.
    pub rank_in_cluster: usize,
}
