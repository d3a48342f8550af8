//! Faithfulness of attribution scores (comprehensiveness, sufficiency,
//! agreement with leave-one-out) and rank correlation between faithfulness
//! and counterfactual quality across attribution methods.

mod kendall;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kendall::kendall_tau;

use crate::attribution::{occlusion_attribute, rank_words, word_scores, TextClassifier};
use crate::error::{Error, Result};
use crate::text::{join_kept, normalized_word_tokens};
use crate::types::{AttributionMethod, AttributionResult};

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::InvalidInput("no thresholds".into()));
    }
    if let Some(q) = thresholds.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::InvalidInput(format!("threshold {q} outside (0, 1]")));
    }
    Ok(())
}

/// Number of top words selected at threshold `q` of `w` words: ⌈q·w⌉.
pub fn top_count(q: f64, w: usize) -> usize {
    ((q * w as f64 - 1e-9).ceil() as usize).clamp(1, w)
}

struct Ranked {
    words: Vec<String>,
    order: Vec<usize>,
    full: f64,
}

fn ranked<C: TextClassifier + ?Sized>(
    attr: &AttributionResult,
    text: &str,
    target_label: &str,
    classifier: &C,
) -> Result<Ranked> {
    let words = normalized_word_tokens(text);
    if words.is_empty() {
        return Err(Error::InvalidInput("empty text".into()));
    }
    attr.validate(words.len())?;
    let order = rank_words(&word_scores(attr, words.len()));
    let full = classifier.prob(&words.join(" "), target_label)?;
    Ok(Ranked { words, order, full })
}

fn erasure_mean<C: TextClassifier + ?Sized>(
    attr: &AttributionResult,
    text: &str,
    target_label: &str,
    classifier: &C,
    thresholds: &[f64],
    keep_top: bool,
) -> Result<f64> {
    check_thresholds(thresholds)?;
    let r = ranked(attr, text, target_label, classifier)?;
    let w = r.words.len();
    let mut total = 0.0;
    for &q in thresholds {
        let mut top = vec![false; w];
        for &i in &r.order[..top_count(q, w)] {
            top[i] = true;
        }
        let perturbed = join_kept(&r.words, |i| top[i] == keep_top);
        total += r.full - classifier.prob(&perturbed, target_label)?;
    }
    Ok(total / thresholds.len() as f64)
}

/// Mean probability drop after deleting the top-attributed words at each threshold.
pub fn comprehensiveness<C: TextClassifier + ?Sized>(
    attr: &AttributionResult,
    text: &str,
    target_label: &str,
    classifier: &C,
    thresholds: &[f64],
) -> Result<f64> {
    erasure_mean(attr, text, target_label, classifier, thresholds, false)
}

/// Mean probability drop when only the top-attributed words are kept.
pub fn sufficiency<C: TextClassifier + ?Sized>(
    attr: &AttributionResult,
    text: &str,
    target_label: &str,
    classifier: &C,
    thresholds: &[f64],
) -> Result<f64> {
    erasure_mean(attr, text, target_label, classifier, thresholds, true)
}

/// τ-b between the attribution's word scores and leave-one-out scores.
pub fn tau_loo<C: TextClassifier + ?Sized>(
    attr: &AttributionResult,
    text: &str,
    target_label: &str,
    classifier: &C,
) -> Result<f64> {
    let words = normalized_word_tokens(text);
    if words.len() < 2 {
        return Err(Error::InvalidInput("τ-LOO needs at least 2 words".into()));
    }
    attr.validate(words.len())?;
    let scores: Vec<f64> = word_scores(attr, words.len())
        .into_iter()
        .map(|s| s.unwrap_or(f64::NEG_INFINITY))
        .collect();
    let loo = occlusion_attribute(text, target_label, classifier)?;
    kendall_tau(&scores, &loo.scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFaithfulness {
    pub id: String,
    pub comprehensiveness: f64,
    pub sufficiency: f64,
    /// `None` when τ is undefined (constant scores or too few words).
    pub tau_loo: Option<f64>,
}

pub fn instance_faithfulness<C: TextClassifier + ?Sized>(
    id: &str,
    attr: &AttributionResult,
    text: &str,
    classifier: &C,
    thresholds: &[f64],
) -> Result<InstanceFaithfulness> {
    let target = &attr.target_label;
    let tau = match tau_loo(attr, text, target, classifier) {
        Ok(t) => Some(t),
        Err(Error::Metric(_)) | Err(Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(InstanceFaithfulness {
        id: id.to_owned(),
        comprehensiveness: comprehensiveness(attr, text, target, classifier, thresholds)?,
        sufficiency: sufficiency(attr, text, target, classifier, thresholds)?,
        tau_loo: tau,
    })
}

/// Means over instances for one attribution method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessCell {
    pub comprehensiveness: f64,
    pub sufficiency: f64,
    pub tau_loo: Option<f64>,
    pub n: usize,
    /// Instances left out of the τ mean.
    pub tau_excluded: usize,
}

impl FaithfulnessCell {
    pub fn from_instances(rows: &[InstanceFaithfulness]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Metric("no instances evaluated".into()));
        }
        let n = rows.len() as f64;
        let taus: Vec<f64> = rows.iter().filter_map(|r| r.tau_loo).collect();
        Ok(FaithfulnessCell {
            comprehensiveness: rows.iter().map(|r| r.comprehensiveness).sum::<f64>() / n,
            sufficiency: rows.iter().map(|r| r.sufficiency).sum::<f64>() / n,
            tau_loo: (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64),
            n: rows.len(),
            tau_excluded: rows.len() - taus.len(),
        })
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Comprehensiveness => Some(self.comprehensiveness),
            Metric::Sufficiency => Some(self.sufficiency),
            Metric::TauLoo => self.tau_loo,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub dataset: String,
    pub thresholds: Vec<f64>,
    pub methods: BTreeMap<AttributionMethod, FaithfulnessCell>,
}

/// Quality and faithfulness metrics with their better direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Slfr,
    Ppl,
    Ts,
    Comprehensiveness,
    Sufficiency,
    TauLoo,
}

impl Metric {
    pub const QUALITY: [Metric; 3] = [Metric::Slfr, Metric::Ppl, Metric::Ts];
    pub const FAITHFULNESS: [Metric; 3] = [Metric::Comprehensiveness, Metric::Sufficiency, Metric::TauLoo];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Slfr | Metric::Comprehensiveness | Metric::TauLoo)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Slfr => "slfr",
            Metric::Ppl => "ppl",
            Metric::Ts => "ts",
            Metric::Comprehensiveness => "comprehensiveness",
            Metric::Sufficiency => "sufficiency",
            Metric::TauLoo => "tau_loo",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::QUALITY
            .into_iter()
            .chain(Metric::FAITHFULNESS)
            .find(|m| m.as_str() == s || (s == "comp" && *m == Metric::Comprehensiveness) || (s == "suff" && *m == Metric::Sufficiency))
            .ok_or_else(|| Error::InvalidInput(format!("metric '{s}' has no known orientation")))
    }
}

/// τ between the method rankings induced by a quality metric and a faithfulness metric.
/// Both are oriented so that larger means better before ranking.
pub fn correlate_quality_faithfulness<K: Ord + Clone + std::fmt::Debug>(
    quality: &BTreeMap<K, f64>,
    quality_metric: Metric,
    faithfulness: &BTreeMap<K, f64>,
    faithfulness_metric: Metric,
) -> Result<f64> {
    let keys: Vec<&K> = quality.keys().collect();
    if keys != faithfulness.keys().collect::<Vec<_>>() {
        return Err(Error::InvalidInput(format!(
            "method sets differ: {:?} vs {:?}",
            quality.keys().collect::<Vec<_>>(),
            faithfulness.keys().collect::<Vec<_>>()
        )));
    }
    if keys.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 methods to correlate".into()));
    }
    let orient = |m: Metric, v: f64| if m.higher_is_better() { v } else { -v };
    let q: Vec<f64> = keys.iter().map(|k| orient(quality_metric, quality[*k])).collect();
    let f: Vec<f64> = keys.iter().map(|k| orient(faithfulness_metric, faithfulness[*k])).collect();
    kendall_tau(&q, &f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub quality_metric: Metric,
    pub faithfulness_metric: Metric,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub methods: Vec<AttributionMethod>,
    pub entries: Vec<CorrelationEntry>,
}

/// Every quality × faithfulness pairing over the methods present in both inputs.
pub fn correlation_grid(
    quality: &BTreeMap<AttributionMethod, BTreeMap<Metric, f64>>,
    faithfulness: &FaithfulnessReport,
) -> Result<CorrelationReport> {
    let methods: Vec<AttributionMethod> = quality
        .keys()
        .filter(|m| faithfulness.methods.contains_key(m))
        .copied()
        .collect();
    let mut entries = Vec::new();
    for qm in Metric::QUALITY {
        for fm in Metric::FAITHFULNESS {
            let q: Option<BTreeMap<AttributionMethod, f64>> =
                methods.iter().map(|m| quality[m].get(&qm).map(|v| (*m, *v))).collect();
            let f: Option<BTreeMap<AttributionMethod, f64>> =
                methods.iter().map(|m| faithfulness.methods[m].get(fm).map(|v| (*m, v))).collect();
            let tau = match (q, f) {
                (Some(q), Some(f)) => correlate_quality_faithfulness(&q, qm, &f, fm).ok(),
                _ => None,
            };
            entries.push(CorrelationEntry {
                quality_metric: qm,
                faithfulness_metric: fm,
                tau,
            });
        }
    }
    Ok(CorrelationReport { methods, entries })
}
