use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DemonstrationPool, Engine};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_records, EvalReport};
use crate::gateway::EndpointKind;
use crate::manifest::Manifest;
use crate::selection::ClusteringReport;
use crate::types::{AttributionMethod, CounterfactualRecord, FlipStatus, GenerationMethod, Instance};

/// Share of failed records above which a run is flagged degraded.
pub const DEGRADED_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationSummary {
    /// ℓ, the demonstrations placed in each prompt.
    pub per_instance: usize,
    pub built: usize,
    pub consumed: usize,
    pub rejected: usize,
    pub no_edit: usize,
    pub failed: usize,
    /// Queries that received fewer than ℓ demonstrations.
    pub short_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub method: GenerationMethod,
    pub attribution_method: Option<AttributionMethod>,
    pub include_important_words: bool,
    pub flip_verification: bool,
    pub n_instances: usize,
    pub n_generated: usize,
    pub n_failed: usize,
    pub n_no_edit: usize,
    pub failures_by_stage: BTreeMap<String, usize>,
    pub degraded: bool,
    pub warnings: Vec<String>,
    pub attribution_calls: u64,
    pub verify_calls: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demonstrations: Option<DemonstrationSummary>,
    /// FitCF: share of generated records whose flip the classifier confirmed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verifier_flip_rate: Option<f64>,
    /// FIZLE: share of records with at least one proposed word absent from the input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hallucination_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalReport>,
}

pub struct RunOutput {
    pub records: Vec<CounterfactualRecord>,
    pub report: RunReport,
    pub demonstrations: Option<DemonstrationPool>,
    pub clustering: Option<ClusteringReport>,
    /// `(cache key, response hash)` for every model call of this run.
    pub transcript: Vec<(String, String)>,
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Generates one record per instance, then evaluates them.
///
/// The gateway transcript is reset at the start, so `RunOutput::transcript`
/// covers exactly this run.
pub fn run_experiment(engine: &Engine<'_>, dataset: &[Instance]) -> Result<RunOutput> {
    if dataset.is_empty() {
        return Err(Error::Degraded("dataset is empty".into()));
    }
    let cfg = &engine.config;
    let gateway = engine.gateway();
    gateway.take_transcript();
    if cfg.runtime.evaluate {
        gateway.check_scorer(engine.binding(EndpointKind::Scorer)?)?;
    }

    let mut pool = None;
    let mut short_queries = 0;
    let records: Vec<CounterfactualRecord> = match cfg.method {
        GenerationMethod::Zerocf => dataset.par_iter().map(|i| engine.zerocf_generate(i)).collect(),
        GenerationMethod::Fizle => dataset.par_iter().map(|i| engine.fizle_generate(i)).collect(),
        GenerationMethod::Fitcf => {
            let l = cfg.demos();
            // One extra so every query still has ℓ after its own pair is left out.
            let p = engine.build_demonstrations(dataset, None, l + 1)?;
            let recs: Vec<CounterfactualRecord> = dataset
                .par_iter()
                .map(|i| {
                    let demos = p.for_query(&i.id, l);
                    let mut rec = engine.fitcf_generate(i, &demos);
                    if demos.len() < l {
                        rec.notes.push(format!("{} of {l} demonstrations available", demos.len()));
                    }
                    rec
                })
                .collect();
            short_queries = dataset.iter().filter(|i| p.for_query(&i.id, l).len() < l).count();
            pool = Some(p);
            recs
        }
    };

    let n = records.len();
    let n_failed = records.iter().filter(|r| !r.succeeded()).count();
    let mut failures_by_stage = BTreeMap::new();
    for f in records.iter().filter_map(|r| r.failure.as_ref()) {
        *failures_by_stage.entry(f.stage.clone()).or_insert(0) += 1;
    }
    let generated: Vec<&CounterfactualRecord> = records.iter().filter(|r| r.succeeded()).collect();
    let mut warnings = Vec::new();
    let degraded = n_failed as f64 > DEGRADED_FAILURE_RATE * n as f64;
    if degraded {
        warnings.push(format!("{n_failed} of {n} records failed"));
    }
    let demonstrations = pool.as_ref().map(|p| DemonstrationSummary {
        per_instance: cfg.demos(),
        built: p.demonstrations.len(),
        consumed: p.consumed,
        rejected: p.rejected,
        no_edit: p.no_edit,
        failed: p.failed,
        short_queries,
    });
    if short_queries > 0 {
        warnings.push(format!("{short_queries} queries received fewer than {} demonstrations", cfg.demos()));
    }
    let clustering = match (&pool, cfg.runtime.clustering_report) {
        (Some(p), true) => p.clustering.as_ref().map(|c| ClusteringReport::new(c, &p.embeddings)),
        _ => None,
    };

    let evaluation = if cfg.runtime.evaluate && !generated.is_empty() {
        let owned: Vec<CounterfactualRecord> = generated.iter().map(|r| (*r).clone()).collect();
        Some(evaluate_records(
            &owned,
            gateway,
            engine.binding(EndpointKind::Generator)?,
            engine.binding(EndpointKind::Scorer)?,
            &engine.prompts.flip_judge,
        )?)
    } else {
        None
    };
    if cfg.runtime.evaluate && generated.is_empty() {
        warnings.push("no records to evaluate".into());
    }

    let report = RunReport {
        dataset: engine.labels.dataset_name().to_owned(),
        method: cfg.method,
        attribution_method: match cfg.method {
            GenerationMethod::Fizle => None,
            _ => cfg.attribution_method,
        },
        include_important_words: cfg.include_important_words,
        flip_verification: cfg.flip_verification,
        n_instances: n,
        n_generated: generated.len(),
        n_failed,
        n_no_edit: generated.iter().filter(|r| r.no_edit).count(),
        failures_by_stage,
        degraded,
        warnings,
        attribution_calls: engine.attribution_calls(),
        verify_calls: engine.verify_calls(),
        demonstrations,
        verifier_flip_rate: (cfg.method == GenerationMethod::Fitcf)
            .then(|| rate(generated.iter().filter(|r| r.flip_verified == FlipStatus::Accepted).count(), generated.len()))
            .flatten(),
        hallucination_rate: (cfg.method == GenerationMethod::Fizle)
            .then(|| {
                rate(
                    generated
                        .iter()
                        .filter(|r| r.hallucinated_words.as_ref().is_some_and(|h| !h.is_empty()))
                        .count(),
                    generated.len(),
                )
            })
            .flatten(),
        evaluation,
    };
    Ok(RunOutput {
        records,
        report,
        demonstrations: pool,
        clustering,
        transcript: gateway.take_transcript(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(path.to_owned())
}

pub(crate) fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub(crate) fn to_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes every artifact of a run into `dir` (created if missing) and
/// returns the written paths.
pub fn write_run(dir: &Path, output: &RunOutput, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![
        write_file(&dir.join("records.jsonl"), &to_jsonl(&output.records)?)?,
        write_file(&dir.join("report.json"), &to_pretty(&output.report)?)?,
        write_file(&dir.join("manifest.json"), &to_pretty(manifest)?)?,
    ];
    if let Some(eval) = &output.report.evaluation {
        written.push(write_file(&dir.join("metrics.csv"), eval.to_csv().as_bytes())?);
    }
    if let Some(pool) = &output.demonstrations {
        written.push(write_file(&dir.join("demonstrations.jsonl"), &to_jsonl(&pool.demonstrations)?)?);
    }
    if let Some(c) = &output.clustering {
        written.push(write_file(&dir.join("clustering.csv"), c.to_csv().as_bytes())?);
        written.push(write_file(&dir.join("clustering.json"), &to_pretty(c)?)?);
    }
    Ok(written)
}
