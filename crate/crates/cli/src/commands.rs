use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fitcf_core::config::RunConfig;
use fitcf_core::dataset::load_dataset;
use fitcf_core::evaluation::evaluate_records;
use fitcf_core::faithfulness::{correlation_grid, FaithfulnessReport, Metric};
use fitcf_core::gateway::{EndpointKind, Gateway, ReplayCache};
use fitcf_core::manifest::{config_hash, Manifest};
use fitcf_core::pipeline::{default_gateway, run_ablation, run_experiment, write_run, Engine, RunReport};
use fitcf_core::types::{AttributionMethod, CounterfactualRecord, Instance};
use fitcf_core::Error;

use crate::{CacheAction, Cli, Command, Global};

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ENDPOINT: u8 = 3;
pub const EXIT_DEGRADED: u8 = 4;

/// Exit status and the files a command wrote.
#[derive(Debug, Default)]
pub struct CommandOutcome {
    pub exit_code: u8,
    pub artifacts: Vec<PathBuf>,
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config { .. }) => EXIT_CONFIG,
        Some(e) if e.is_endpoint_error() => EXIT_ENDPOINT,
        Some(Error::Degraded(_) | Error::Dataset { .. } | Error::UnknownLabel { .. } | Error::EmptyDataset(_)) => {
            EXIT_DEGRADED
        }
        _ => EXIT_OTHER,
    }
}

fn quoted(p: &Path) -> Result<String> {
    let abs = std::path::absolute(p).with_context(|| format!("resolving {}", p.display()))?;
    Ok(serde_json::to_string(&abs.to_string_lossy())?)
}

/// `--set` values followed by the dedicated flags, in the form recorded in manifests.
fn overrides(g: &Global) -> Result<Vec<String>> {
    let mut o = g.set.clone();
    if let Some(dir) = &g.cache_dir {
        o.push(format!("runtime.cache_dir={}", quoted(dir)?));
    }
    if g.offline {
        o.push("runtime.offline=true".into());
    }
    if let Some(seed) = g.seed {
        o.push(format!("seed={seed}"));
    }
    Ok(o)
}

struct Session {
    config: RunConfig,
    overrides: Vec<String>,
    gateway: Gateway,
}

impl Session {
    fn open(g: &Global) -> Result<Self> {
        let Some(path) = &g.config else {
            return Err(Error::Config {
                field: "--config".into(),
                message: "this command needs a run configuration".into(),
            }
            .into());
        };
        let overrides = overrides(g)?;
        let config = RunConfig::load(path, &overrides)?;
        let cache = ReplayCache::open(cache_dir(&config))?;
        let gateway = default_gateway(&config, cache, false)?;
        Ok(Session {
            config,
            overrides,
            gateway,
        })
    }

    fn dataset(&self) -> Result<Vec<Instance>> {
        Ok(load_dataset(&self.config.dataset_path(), &self.config.label_set()?)?)
    }

    /// `<output_dir>/<UTC timestamp>-<config hash prefix><suffix>`
    fn run_dir(&self, suffix: &str) -> Result<PathBuf> {
        let ts = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let hash = config_hash(&self.config)?;
        Ok(self
            .config
            .resolve(&self.config.runtime.output_dir)
            .join(format!("{ts}-{}{suffix}", &hash[..12])))
    }
}

fn cache_dir(config: &RunConfig) -> PathBuf {
    match &config.runtime.cache_dir {
        Some(d) => config.resolve(d),
        None => config.resolve(&config.runtime.output_dir).join("cache"),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_owned())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_owned())
}

fn warn_report(report: &RunReport) {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.degraded {
        eprintln!("warning: run is degraded");
    }
}

pub fn dispatch(cli: &Cli) -> Result<CommandOutcome> {
    match &cli.command {
        Command::Run { out } => cmd_run(&cli.global, out.as_deref()),
        Command::Ablate { out } => cmd_ablate(&cli.global, out.as_deref()),
        Command::Evaluate { records, out } => cmd_evaluate(&cli.global, records, out.as_deref()),
        Command::Faithfulness { out } => cmd_faithfulness(&cli.global, out.as_deref()),
        Command::Correlate { faithfulness, runs, out } => cmd_correlate(faithfulness, runs, out.as_deref()),
        Command::Cache { action } => cmd_cache(&cli.global, action),
        Command::Report { runs, out } => cmd_report(runs, out),
    }
}

pub fn cmd_run(g: &Global, out: Option<&Path>) -> Result<CommandOutcome> {
    let s = Session::open(g)?;
    let dataset = s.dataset()?;
    let engine = Engine::new(s.config.clone(), &s.gateway)?;
    let output = run_experiment(&engine, &dataset)?;
    let manifest = Manifest::new(&engine.config, &s.overrides, &dataset, &engine.prompts, &output.transcript)?;
    let dir = match out {
        Some(d) => d.to_owned(),
        None => s.run_dir("")?,
    };
    let artifacts = write_run(&dir, &output, &manifest)?;
    warn_report(&output.report);
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts,
    })
}

pub fn cmd_ablate(g: &Global, out: Option<&Path>) -> Result<CommandOutcome> {
    let s = Session::open(g)?;
    let dataset = s.dataset()?;
    let result = run_ablation(&s.config, &s.overrides, &s.gateway, &dataset)?;
    let dir = match out {
        Some(d) => d.to_owned(),
        None => s.run_dir("-ablation")?,
    };
    let mut artifacts = Vec::new();
    for run in &result.runs {
        artifacts.extend(write_run(&dir.join(run.cell.name()), &run.output, &run.manifest)?);
        warn_report(&run.output.report);
    }
    artifacts.push(write_text(&dir.join("ablation_table.csv"), &result.table_csv())?);
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts,
    })
}

fn read_records(path: &Path) -> Result<Vec<CounterfactualRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

pub fn cmd_evaluate(g: &Global, records: &Path, out: Option<&Path>) -> Result<CommandOutcome> {
    let s = Session::open(g)?;
    let recs = read_records(records)?;
    let engine = Engine::new(s.config.clone(), &s.gateway)?;
    let scorer = engine.binding(EndpointKind::Scorer)?;
    s.gateway.check_scorer(scorer)?;
    let report = evaluate_records(
        &recs,
        &s.gateway,
        engine.binding(EndpointKind::Generator)?,
        scorer,
        &engine.prompts.flip_judge,
    )?;
    let dir = out
        .map(Path::to_owned)
        .unwrap_or_else(|| records.parent().map(Path::to_owned).unwrap_or_default());
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts: vec![
            write_json(&dir.join("evaluation.json"), &report)?,
            write_text(&dir.join("metrics.csv"), &report.to_csv())?,
        ],
    })
}

pub fn cmd_faithfulness(g: &Global, out: Option<&Path>) -> Result<CommandOutcome> {
    let s = Session::open(g)?;
    let dataset = s.dataset()?;
    let engine = Engine::new(s.config.clone(), &s.gateway)?;
    let report = engine.faithfulness_report(&dataset)?;
    let dir = match out {
        Some(d) => d.to_owned(),
        None => s.run_dir("-faithfulness")?,
    };
    let mut csv = String::from("method,comprehensiveness,sufficiency,tau_loo,n,tau_excluded\n");
    for (m, c) in &report.methods {
        csv.push_str(&format!(
            "{m},{},{},{},{},{}\n",
            c.comprehensiveness,
            c.sufficiency,
            c.tau_loo.map(|t| t.to_string()).unwrap_or_default(),
            c.n,
            c.tau_excluded
        ));
    }
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts: vec![
            write_json(&dir.join("faithfulness.json"), &report)?,
            write_text(&dir.join("faithfulness.csv"), &csv)?,
        ],
    })
}

fn read_report(run: &Path) -> Result<RunReport> {
    let path = run.join("report.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn cmd_correlate(faithfulness: &Path, runs: &[PathBuf], out: Option<&Path>) -> Result<CommandOutcome> {
    let text = std::fs::read_to_string(faithfulness).with_context(|| format!("reading {}", faithfulness.display()))?;
    let faith: FaithfulnessReport = serde_json::from_str(&text)?;
    let mut quality: BTreeMap<AttributionMethod, BTreeMap<Metric, f64>> = BTreeMap::new();
    for run in runs {
        let report = read_report(run)?;
        let Some(method) = report.attribution_method else {
            bail!("{}: run has no attribution method", run.display());
        };
        let Some(eval) = report.evaluation else {
            bail!("{}: run was not evaluated", run.display());
        };
        let mut m = BTreeMap::new();
        m.insert(Metric::Slfr, eval.slfr);
        if let Some(p) = eval.mean_ppl {
            m.insert(Metric::Ppl, p);
        }
        if let Some(t) = eval.mean_ts {
            m.insert(Metric::Ts, t);
        }
        if quality.insert(method, m).is_some() {
            bail!("more than one run uses attribution method {method}");
        }
    }
    let grid = correlation_grid(&quality, &faith)?;
    let path = out
        .map(Path::to_owned)
        .unwrap_or_else(|| faithfulness.with_file_name("correlation.json"));
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts: vec![write_json(&path, &grid)?],
    })
}

pub fn cmd_cache(g: &Global, action: &CacheAction) -> Result<CommandOutcome> {
    match action {
        CacheAction::Inspect => {
            let dir = match (&g.cache_dir, &g.config) {
                (Some(d), _) => d.clone(),
                (None, Some(_)) => cache_dir(&RunConfig::load(g.config.as_ref().unwrap(), &overrides(g)?)?),
                (None, None) => {
                    return Err(Error::Config {
                        field: "--cache-dir".into(),
                        message: "give --cache-dir or --config".into(),
                    }
                    .into())
                }
            };
            let cache = ReplayCache::open(&dir)?;
            let mut counts: BTreeMap<(String, String, String), (usize, usize)> = BTreeMap::new();
            for e in cache.entries()? {
                let c = counts
                    .entry((e.header.kind.to_string(), e.header.model_name.clone(), e.header.path.clone()))
                    .or_default();
                c.0 += 1;
                c.1 += e.value.len();
            }
            println!("kind\tmodel\tpath\tentries\tbytes");
            for ((k, m, p), (n, b)) in &counts {
                println!("{k}\t{m}\t{p}\t{n}\t{b}");
            }
            Ok(CommandOutcome::default())
        }
        CacheAction::Warm => {
            let s = Session::open(g)?;
            let dataset = s.dataset()?;
            let engine = Engine::new(s.config.clone(), &s.gateway)?;
            let output = run_experiment(&engine, &dataset)?;
            warn_report(&output.report);
            for kind in EndpointKind::ALL {
                eprintln!(
                    "{kind}: {} network calls, {} cache hits",
                    s.gateway.network_calls(kind),
                    s.gateway.cache_hits(kind)
                );
            }
            Ok(CommandOutcome::default())
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn cmd_report(runs: &[PathBuf], out: &Path) -> Result<CommandOutcome> {
    let mut summary = String::from(
        "run,dataset,method,attribution_method,important_words,flip_verification,n_instances,n_failed,slfr,judge_error_rate,mean_ppl,mean_ts,verifier_flip_rate,degraded\n",
    );
    let mut rows = String::from("run,id,predicted_label,flip_verified,no_edit,failed_stage,original,counterfactual\n");
    for run in runs {
        let name = run.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let r = read_report(run)?;
        let e = r.evaluation.as_ref();
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&name),
            csv_field(&r.dataset),
            r.method.as_str(),
            r.attribution_method.map(|m| m.as_str()).unwrap_or(""),
            r.include_important_words,
            r.flip_verification,
            r.n_instances,
            r.n_failed,
            opt(e.map(|e| e.slfr)),
            opt(e.map(|e| e.judge_error_rate)),
            opt(e.and_then(|e| e.mean_ppl)),
            opt(e.and_then(|e| e.mean_ts)),
            opt(r.verifier_flip_rate),
            r.degraded
        ));
        for rec in read_records(&run.join("records.jsonl"))? {
            rows.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv_field(&name),
                csv_field(&rec.instance.id),
                csv_field(&rec.predicted_label),
                serde_json::to_value(rec.flip_verified)?.as_str().unwrap_or_default(),
                rec.no_edit,
                rec.failure.as_ref().map(|f| f.stage.as_str()).unwrap_or(""),
                csv_field(&rec.instance.text),
                csv_field(&rec.counterfactual_text)
            ));
        }
    }
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        artifacts: vec![
            write_text(&out.join("summary.csv"), &summary)?,
            write_text(&out.join("records.csv"), &rows)?,
        ],
    })
}
