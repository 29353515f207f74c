//! Command-line front end. Every command reads bundles or earlier outputs
//! from disk and writes one output directory, staged and moved into place
//! on success.

mod commands;
mod methods;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::alien::AblationVariant;

pub use commands::run;
pub use methods::{Method, ScoringContext, ALIEN_DIR, GAUSSIAN_DIR};
pub use output::Staged;

#[derive(Debug, Parser)]
#[command(name = "alien-ue", version, about = "Post-hoc uncertainty heads and baselines for frozen classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/val/test bundles and ensemble members.
    Synth(SynthArgs),
    /// Fit error heads, probes and Gaussian statistics on a training bundle.
    Fit(FitArgs),
    /// Grid-search the error head on train, selecting on val.
    Grid(FitArgs),
    /// Write per-example scores for a bundle.
    Score(ScoreArgs),
    /// Bootstrap evaluation of methods on a bundle.
    Eval(EvalArgs),
    /// Ensemble uncertainty decomposition and its correlation with method scores.
    Ensemble(EnsembleArgs),
    /// Merge eval outputs into ranked tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Replace a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_val: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub c: usize,
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Fraction of each split in the epistemic pocket.
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Ensemble size (0 skips the ensemble).
    #[arg(long, default_value_t = crate::benchmark::ENSEMBLE_MEMBERS)]
    pub members: usize,
    #[arg(long, default_value_t = crate::benchmark::MEMBER_INIT_STD)]
    pub member_init_std: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = AblationVariant::FullAlien)]
    pub variant: AblationVariant,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Probe learning rate when not grid-searching.
    #[arg(long, default_value_t = 1e-3)]
    pub probe_lr: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Select hyperparameters on --val instead of using the fixed values.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "alien")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub train_args: TrainArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SourceArgs {
    /// Bundle to score.
    #[arg(long)]
    pub test: PathBuf,
    /// Training bundle for methods fit on the fly (MD family, RDE).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Output directory of `fit` or `grid`.
    #[arg(long)]
    pub fits: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sr,entropy")]
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Dataset label in reports; defaults to the test bundle's directory name.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 10)]
    pub ece_bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnsembleArgs {
    /// Directory holding `ensemble_manifest.json` and member files.
    #[arg(long)]
    pub members: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Eval output directories.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}
