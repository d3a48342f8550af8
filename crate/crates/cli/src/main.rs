//! `fitcf`: run, ablate, evaluate and analyse counterfactual generation experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "fitcf", version, about = "Attribution-guided counterfactual generation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set flip_verification=false`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Replay cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Fail on cache misses instead of calling endpoints.
    #[arg(long, global = true)]
    pub offline: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate counterfactuals for the dataset and evaluate them.
    Run {
        /// Output directory (default: a timestamped directory under runtime.output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the important-words × demonstrations × verification grid.
    Ablate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an existing records.jsonl.
    Evaluate {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Comprehensiveness, sufficiency and τ-LOO per attribution method.
    Faithfulness {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank correlation between quality and faithfulness across attribution methods.
    Correlate {
        /// A faithfulness.json file.
        #[arg(long)]
        faithfulness: PathBuf,
        /// Run directories, one per attribution method.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect or warm the replay cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Export CSV summaries of run directories.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum CacheAction {
    /// Entry counts per endpoint, model and path.
    Inspect,
    /// Execute the configured run to fill the cache, writing no artifacts.
    Warm,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("{}", a.display());
            }
            ExitCode::from(outcome.exit_code)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
