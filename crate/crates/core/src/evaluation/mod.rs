//! Counterfactual quality metrics: soft label flip rate, perplexity and
//! textual similarity, per record and aggregated.

mod levenshtein;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use levenshtein::levenshtein;

use crate::error::{Error, Result};
use crate::gateway::{EndpointBinding, Gateway};
use crate::prompts::{base_vars, PromptTemplate};
use crate::text::normalized_word_tokens;
use crate::types::{CounterfactualRecord, LabelSet};

/// Judge answer for "did the label change?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Error,
}

/// Lowercases, drops punctuation and maps exactly "yes"/"no"; anything else is an error.
pub fn parse_verdict(response: &str) -> Verdict {
    let norm: String = response
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .trim()
        .to_lowercase();
    match norm.as_str() {
        "yes" => Verdict::Yes,
        "no" => Verdict::No,
        _ => Verdict::Error,
    }
}

/// Asks the generator LLM whether `original` and `counterfactual` are classified differently.
/// Transport failures become [`Verdict::Error`].
pub fn judge_flip(
    gateway: &Gateway,
    generator: &EndpointBinding,
    labels: &LabelSet,
    template: &PromptTemplate,
    original: &str,
    counterfactual: &str,
) -> Result<Verdict> {
    let mut vars = base_vars(labels);
    vars.insert("instance", original.to_owned());
    vars.insert("counterfactual", counterfactual.to_owned());
    let prompt = template.render(&vars)?;
    Ok(match gateway.generate_raw(generator, &prompt) {
        Ok(answer) => parse_verdict(&answer),
        Err(e) if e.is_endpoint_error() => Verdict::Error,
        Err(e) => return Err(e),
    })
}

/// Soft label flip rate and judge error rate. Errors count as non-flips.
pub fn slfr(verdicts: &[Verdict]) -> Result<(f64, f64)> {
    if verdicts.is_empty() {
        return Err(Error::Metric("flip rate over zero records".into()));
    }
    let n = verdicts.len() as f64;
    let yes = verdicts.iter().filter(|v| **v == Verdict::Yes).count() as f64;
    let err = verdicts.iter().filter(|v| **v == Verdict::Error).count() as f64;
    Ok((yes / n, err / n))
}

/// `exp(−mean logprob)` over scored tokens.
pub fn perplexity_from_logprobs(logprobs: &[f64]) -> Result<f64> {
    if logprobs.is_empty() {
        return Err(Error::Metric("no scored tokens".into()));
    }
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok((-mean).exp())
}

pub fn perplexity(gateway: &Gateway, scorer: &EndpointBinding, text: &str) -> Result<f64> {
    let scored: Vec<f64> = gateway
        .token_logprobs(scorer, text)?
        .into_iter()
        .filter_map(|t| t.logprob)
        .collect();
    perplexity_from_logprobs(&scored)
}

/// Word-level edit distance divided by the original's word count.
pub fn textual_similarity(original: &str, counterfactual: &str) -> Result<f64> {
    let a = normalized_word_tokens(original);
    if a.is_empty() {
        return Err(Error::Metric("original text has no words".into()));
    }
    let b = normalized_word_tokens(counterfactual);
    Ok(levenshtein(&a, &b) as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetrics {
    pub id: String,
    pub verdict: Verdict,
    pub ppl: Option<f64>,
    pub ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Records that produced a counterfactual and were evaluated.
    pub n: usize,
    pub slfr: f64,
    pub non_flip_rate: f64,
    pub judge_error_rate: f64,
    pub mean_ppl: Option<f64>,
    pub mean_ts: Option<f64>,
    pub ppl_errors: usize,
    pub ts_errors: usize,
    pub records: Vec<RecordMetrics>,
}

impl EvalReport {
    pub fn from_records(records: Vec<RecordMetrics>) -> Result<Self> {
        let verdicts: Vec<Verdict> = records.iter().map(|r| r.verdict).collect();
        let (slfr, judge_error_rate) = slfr(&verdicts)?;
        let n = records.len();
        let no = verdicts.iter().filter(|v| **v == Verdict::No).count() as f64 / n as f64;
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let ppls: Vec<f64> = records.iter().filter_map(|r| r.ppl).collect();
        let tss: Vec<f64> = records.iter().filter_map(|r| r.ts).collect();
        Ok(EvalReport {
            n,
            slfr,
            non_flip_rate: no,
            judge_error_rate,
            ppl_errors: n - ppls.len(),
            ts_errors: n - tss.len(),
            mean_ppl: mean(ppls),
            mean_ts: mean(tss),
            records,
        })
    }

    /// `id,verdict,ppl,ts` rows; missing metrics are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,verdict,ppl,ts\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            let verdict = match r.verdict {
                Verdict::Yes => "yes",
                Verdict::No => "no",
                Verdict::Error => "error",
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::selection::csv_field(&r.id),
                verdict,
                opt(r.ppl),
                opt(r.ts)
            ));
        }
        out
    }
}

/// Scores every successful record. Failed generations are skipped.
pub fn evaluate_records(
    records: &[CounterfactualRecord],
    gateway: &Gateway,
    generator: &EndpointBinding,
    scorer: &EndpointBinding,
    judge_template: &PromptTemplate,
) -> Result<EvalReport> {
    let labels = gateway.labels();
    let rows: Vec<RecordMetrics> = records
        .par_iter()
        .filter(|r| r.succeeded())
        .map(|r| {
            let original = &r.instance.text;
            let cf = &r.counterfactual_text;
            let verdict = judge_flip(gateway, generator, labels, judge_template, original, cf)?;
            let ppl = match perplexity(gateway, scorer, cf) {
                Ok(p) => Some(p),
                Err(Error::Metric(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(RecordMetrics {
                id: r.instance.id.clone(),
                verdict,
                ppl,
                ts: textual_similarity(original, cf).ok(),
            })
        })
        .collect::<Result<_>>()?;
    EvalReport::from_records(rows)
}
