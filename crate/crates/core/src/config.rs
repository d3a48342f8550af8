//! Run configuration: a TOML file plus `dotted.key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{LimeConfig, LimeKernel, MaskSampling, ShapConfig};
use crate::error::{Error, Result};
use crate::faithfulness::DEFAULT_THRESHOLDS;
use crate::gateway::{EndpointBinding, EndpointKind};
use crate::prompts::PromptOverrides;
use crate::types::{AttributionMethod, GenerationMethod, LabelSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub name: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimeSettings {
    pub n_samples: usize,
    pub kernel_width: Option<f64>,
    pub ridge: f64,
}

impl Default for LimeSettings {
    fn default() -> Self {
        let d = LimeConfig::default();
        LimeSettings {
            n_samples: d.n_samples,
            kernel_width: d.kernel_width,
            ridge: d.ridge,
        }
    }
}

impl LimeSettings {
    pub fn to_config(&self) -> LimeConfig {
        LimeConfig {
            n_samples: self.n_samples,
            kernel_width: self.kernel_width,
            ridge: self.ridge,
            sampling: MaskSampling::Random,
            kernel: LimeKernel::Exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapSettings {
    pub n_samples: usize,
    pub exact_max_words: usize,
}

impl Default for ShapSettings {
    fn default() -> Self {
        let d = ShapConfig::default();
        ShapSettings {
            n_samples: d.n_samples,
            exact_max_words: d.exact_max_words,
        }
    }
}

impl ShapSettings {
    pub fn to_config(&self) -> ShapConfig {
        ShapConfig {
            n_samples: self.n_samples,
            exact_max_words: self.exact_max_words,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaithfulnessSettings {
    pub thresholds: Vec<f64>,
    /// Attribution methods compared by `faithfulness` and `correlate`.
    pub methods: Vec<AttributionMethod>,
}

impl Default for FaithfulnessSettings {
    fn default() -> Self {
        FaithfulnessSettings {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            methods: vec![
                AttributionMethod::Gradient,
                AttributionMethod::IntegratedGradients,
                AttributionMethod::Lime,
                AttributionMethod::Shap,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeSettings {
    /// Concurrent requests per endpoint kind.
    pub max_in_flight: usize,
    pub kmeans_max_iter: usize,
    pub ig_steps: u32,
    /// Where run directories are created.
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
    pub clustering_report: bool,
    /// Score the generated records (judge, perplexity, similarity).
    pub evaluate: bool,
}

impl Default for RuntimeSettings {
    fn default() -> Self {
        RuntimeSettings {
            max_in_flight: 4,
            kmeans_max_iter: 100,
            ig_steps: 64,
            output_dir: PathBuf::from("runs"),
            cache_dir: None,
            offline: false,
            clustering_report: true,
            evaluate: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub classifier: Option<EndpointBinding>,
    pub embedder: Option<EndpointBinding>,
    pub generator: Option<EndpointBinding>,
    pub scorer: Option<EndpointBinding>,
    pub attributor: Option<EndpointBinding>,
}

impl Endpoints {
    pub fn get(&self, kind: EndpointKind) -> Option<&EndpointBinding> {
        match kind {
            EndpointKind::Classifier => self.classifier.as_ref(),
            EndpointKind::Embedder => self.embedder.as_ref(),
            EndpointKind::Generator => self.generator.as_ref(),
            EndpointKind::Scorer => self.scorer.as_ref(),
            EndpointKind::Attributor => self.attributor.as_ref(),
        }
    }

    pub fn require(&self, kind: EndpointKind) -> Result<&EndpointBinding> {
        self.get(kind).ok_or_else(|| Error::Config {
            field: format!("endpoints.{kind}"),
            message: "endpoint not configured".into(),
        })
    }
}

fn default_seed() -> u64 {
    0
}
fn default_n() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_k() -> usize {
    5
}
fn default_c() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub method: GenerationMethod,
    /// Required for ZeroCF and FitCF; ignored by FIZLE.
    #[serde(default)]
    pub attribution_method: Option<AttributionMethod>,
    #[serde(default = "default_k")]
    pub num_clusters: usize,
    #[serde(default = "default_c")]
    pub candidates_per_round: usize,
    /// Defaults to twice `num_clusters`.
    #[serde(default)]
    pub demos_per_instance: Option<usize>,
    #[serde(default = "default_n")]
    pub num_important_words: usize,
    #[serde(default = "default_true")]
    pub include_important_words: bool,
    #[serde(default = "default_true")]
    pub flip_verification: bool,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub lime: LimeSettings,
    #[serde(default)]
    pub shap: ShapSettings,
    #[serde(default)]
    pub faithfulness: FaithfulnessSettings,
    #[serde(default)]
    pub runtime: RuntimeSettings,
    #[serde(default)]
    pub prompts: PromptOverrides,
    #[serde(default)]
    pub endpoints: Endpoints,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_owned(),
        message: message.into(),
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string (`method=fitcf`).
fn parse_override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

/// Applies `a.b.c=value` to a TOML document, creating intermediate tables.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(assignment, "override must look like dotted.key=value"))?;
    let path = path.trim();
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(path, "empty key segment"));
    }
    let mut table = doc;
    for (i, key) in keys[..keys.len() - 1].iter().enumerate() {
        let entry = table
            .entry((*key).to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(&keys[..=i].join("."), "not a table"))?;
    }
    table.insert(keys[keys.len() - 1].to_owned(), parse_override_value(raw.trim()));
    Ok(())
}

/// Endpoint tables take their kind from the table name.
fn fill_endpoint_kinds(doc: &mut toml::Table) -> Result<()> {
    let Some(endpoints) = doc.get_mut("endpoints").and_then(|v| v.as_table_mut()) else {
        return Ok(());
    };
    for (name, value) in endpoints.iter_mut() {
        if let Some(t) = value.as_table_mut() {
            match t.get("kind").and_then(|k| k.as_str()) {
                Some(kind) if kind != name => {
                    return Err(config_err(
                        &format!("endpoints.{name}.kind"),
                        format!("'{kind}' does not match the table name"),
                    ))
                }
                Some(_) => {}
                None => {
                    t.insert("kind".into(), toml::Value::String(name.clone()));
                }
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Parses TOML text with overrides applied in order, then validates.
    pub fn from_toml_str(text: &str, overrides: &[String], base_dir: &Path) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err("<file>", e.message()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        fill_endpoint_kinds(&mut doc)?;
        let mut cfg: RunConfig = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_owned();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_owned)
                .unwrap_or_else(|| "<file>".into());
            config_err(&field, msg)
        })?;
        cfg.base_dir = base_dir.to_owned();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_owned).unwrap_or_default();
        RunConfig::from_toml_str(&text, overrides, &base)
    }

    pub fn label_set(&self) -> Result<LabelSet> {
        LabelSet::new(self.dataset.name.clone(), self.dataset.labels.iter().cloned())
            .map_err(|e| config_err("dataset.labels", e.to_string()))
    }

    /// ℓ after applying the 2k default.
    pub fn demos(&self) -> usize {
        self.demos_per_instance.unwrap_or(2 * self.num_clusters)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve(&self.dataset.path)
    }

    pub fn validate(&self) -> Result<()> {
        self.label_set()?;
        let positive = [
            ("num_clusters", self.num_clusters),
            ("candidates_per_round", self.candidates_per_round),
            ("num_important_words", self.num_important_words),
            ("runtime.max_in_flight", self.runtime.max_in_flight),
            ("runtime.kmeans_max_iter", self.runtime.kmeans_max_iter),
            ("lime.n_samples", self.lime.n_samples),
            ("shap.n_samples", self.shap.n_samples),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(config_err(field, "must be >= 1"));
            }
        }
        if self.demos_per_instance == Some(0) && self.method == GenerationMethod::Fitcf {
            return Err(config_err("demos_per_instance", "must be >= 1 for method fitcf"));
        }
        if self.method != GenerationMethod::Fizle && self.attribution_method.is_none() {
            return Err(config_err("attribution_method", "required for zerocf and fitcf"));
        }
        if !(self.lime.ridge > 0.0) {
            return Err(config_err("lime.ridge", "must be > 0"));
        }
        if matches!(self.lime.kernel_width, Some(w) if !(w > 0.0)) {
            return Err(config_err("lime.kernel_width", "must be > 0"));
        }
        if self.shap.exact_max_words > 20 {
            return Err(config_err("shap.exact_max_words", "must be <= 20"));
        }
        if self.faithfulness.thresholds.is_empty()
            || self.faithfulness.thresholds.iter().any(|q| !(*q > 0.0 && *q <= 1.0))
        {
            return Err(config_err("faithfulness.thresholds", "values must lie in (0, 1]"));
        }
        for kind in EndpointKind::ALL {
            if let Some(b) = self.endpoints.get(kind) {
                b.validate()?;
            }
        }
        let mut needed = vec![EndpointKind::Generator, EndpointKind::Classifier];
        if self.runtime.evaluate {
            needed.push(EndpointKind::Scorer);
        }
        if self.method == GenerationMethod::Fitcf {
            needed.push(EndpointKind::Embedder);
        }
        if self.include_important_words && self.attribution_method.is_some_and(AttributionMethod::is_remote) {
            needed.push(EndpointKind::Attributor);
        }
        for kind in needed {
            self.endpoints.require(kind)?;
        }
        Ok(())
    }

    /// Flattened `dotted.key → value` view, used for manifests and diffs.
    pub fn flattened(&self) -> BTreeMap<String, String> {
        fn walk(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, String>) {
            match v {
                toml::Value::Table(t) => {
                    for (k, v) in t {
                        let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                        walk(&p, v, out);
                    }
                }
                other => {
                    out.insert(prefix.to_owned(), other.to_string());
                }
            }
        }
        let mut out = BTreeMap::new();
        if let Ok(v) = toml::Value::try_from(self) {
            walk("", &v, &mut out);
        }
        out
    }
}
