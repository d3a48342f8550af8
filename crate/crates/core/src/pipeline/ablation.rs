use serde::{Deserialize, Serialize};

use super::{run_experiment, Engine, RunOutput};
use crate::config::RunConfig;
use crate::error::Result;
use crate::gateway::Gateway;
use crate::manifest::Manifest;
use crate::types::{GenerationMethod, Instance};

/// One point of the {important words} × {ℓ = k, 2k} × {flip verification} grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationCell {
    pub include_important_words: bool,
    /// `true` for ℓ = 2k, `false` for ℓ = k.
    pub double_demos: bool,
    pub flip_verification: bool,
}

impl AblationCell {
    pub const FULL: AblationCell = AblationCell {
        include_important_words: true,
        double_demos: true,
        flip_verification: true,
    };

    /// All eight cells, full FitCF first.
    pub fn grid() -> Vec<AblationCell> {
        let mut cells = Vec::with_capacity(8);
        for words in [true, false] {
            for double in [true, false] {
                for verify in [true, false] {
                    cells.push(AblationCell {
                        include_important_words: words,
                        double_demos: double,
                        flip_verification: verify,
                    });
                }
            }
        }
        cells
    }

    pub fn name(&self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        format!(
            "words-{}_demos-{}_verify-{}",
            on(self.include_important_words),
            if self.double_demos { "2k" } else { "k" },
            on(self.flip_verification)
        )
    }

    /// The config for this cell and the overrides that produced it.
    pub fn apply(&self, base: &RunConfig) -> (RunConfig, Vec<String>) {
        let mut cfg = base.clone();
        cfg.method = GenerationMethod::Fitcf;
        cfg.include_important_words = self.include_important_words;
        cfg.flip_verification = self.flip_verification;
        let l = if self.double_demos { 2 * cfg.num_clusters } else { cfg.num_clusters };
        cfg.demos_per_instance = Some(l);
        let overrides = vec![
            "method=\"fitcf\"".to_owned(),
            format!("include_important_words={}", self.include_important_words),
            format!("demos_per_instance={l}"),
            format!("flip_verification={}", self.flip_verification),
        ];
        (cfg, overrides)
    }
}

pub struct AblationRun {
    pub cell: AblationCell,
    pub demos: usize,
    pub output: RunOutput,
    pub manifest: Manifest,
}

pub struct AblationResult {
    pub runs: Vec<AblationRun>,
}

/// Runs every grid cell over one shared gateway (and so one replay cache).
pub fn run_ablation(
    base: &RunConfig,
    base_overrides: &[String],
    gateway: &Gateway,
    dataset: &[Instance],
) -> Result<AblationResult> {
    let mut runs = Vec::new();
    for cell in AblationCell::grid() {
        let (cfg, cell_overrides) = cell.apply(base);
        let demos = cfg.demos();
        let engine = Engine::new(cfg, gateway)?;
        let output = run_experiment(&engine, dataset)?;
        let overrides: Vec<String> = base_overrides.iter().cloned().chain(cell_overrides).collect();
        let manifest = Manifest::new(&engine.config, &overrides, dataset, &engine.prompts, &output.transcript)?;
        runs.push(AblationRun {
            cell,
            demos,
            output,
            manifest,
        });
    }
    Ok(AblationResult { runs })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn fmt_delta(v: Option<f64>, full: Option<f64>) -> String {
    match (v, full) {
        (Some(a), Some(b)) => {
            let d = a - b;
            // Avoid printing "-0.0000" for differences that round to zero.
            let d = if d.abs() < 5e-5 { 0.0 } else { d };
            format!("{d:+.4}")
        }
        _ => String::new(),
    }
}

impl AblationResult {
    pub fn full(&self) -> Option<&AblationRun> {
        self.runs.iter().find(|r| r.cell == AblationCell::FULL)
    }

    /// Metric values per cell with signed deltas against the full FitCF cell.
    pub fn table_csv(&self) -> String {
        type Getter = fn(&AblationRun) -> Option<f64>;
        let metrics: [(&str, Getter); 4] = [
            ("slfr", |r| r.output.report.evaluation.as_ref().map(|e| e.slfr)),
            ("ppl", |r| r.output.report.evaluation.as_ref().and_then(|e| e.mean_ppl)),
            ("ts", |r| r.output.report.evaluation.as_ref().and_then(|e| e.mean_ts)),
            ("verifier_flip_rate", |r| r.output.report.verifier_flip_rate),
        ];
        let mut out = String::from("cell,important_words,demos,flip_verification");
        for (name, _) in &metrics {
            out.push_str(&format!(",{name},{name}_delta"));
        }
        out.push('\n');
        let full = self.full();
        for run in &self.runs {
            let c = run.cell;
            out.push_str(&format!(
                "{},{},{},{}",
                c.name(),
                c.include_important_words,
                run.demos,
                c.flip_verification
            ));
            for (_, get) in &metrics {
                let v = get(run);
                out.push_str(&format!(",{},{}", fmt_value(v), fmt_delta(v, full.and_then(get))));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_eight_distinct_cells_full_first() {
        let g = AblationCell::grid();
        assert_eq!(g.len(), 8);
        assert_eq!(g[0], AblationCell::FULL);
        let names: std::collections::BTreeSet<String> = g.iter().map(AblationCell::name).collect();
        assert_eq!(names.len(), 8);
    }

    #[test]
    fn deltas_are_signed() {
        assert_eq!(fmt_delta(Some(0.5), Some(0.5)), "+0.0000");
        assert_eq!(fmt_delta(Some(0.25), Some(0.5)), "-0.2500");
        assert_eq!(fmt_delta(Some(0.75), Some(0.5)), "+0.2500");
        assert_eq!(fmt_delta(None, Some(0.5)), "");
    }
}
