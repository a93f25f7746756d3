use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Fit, test and compare nonnegative Tucker decompositions of multilayer
/// networks. Worker threads default to all cores; set NNTUCK_THREADS to
/// override.
#[derive(Debug, Parser)]
#[command(name = "nntuck", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Estimate one model and write its factors, report and figures.
    Fit(FitArgs),
    /// Cross-validate a grid of regimes and ranks by held-out AUC.
    Sweep(SweepArgs),
    /// Likelihood-ratio test of a null regime against a larger one.
    Test(TestArgs),
    /// Rewrite a fitted model relative to a basis of layers.
    Relative(RelativeArgs),
    /// Consensus and locally aggregated structures of a dataset.
    Consensus(ConsensusArgs),
    /// Sample a dataset from a planted scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Dataset path: a .tsv file, a .json file or a layer-matrix directory.
    #[arg(long)]
    pub data: PathBuf,
    /// long-tsv, layer-matrices or dense-json; inferred from the path if omitted.
    #[arg(long)]
    pub format: Option<String>,
    /// Treat self ties (i, i, ℓ) as observed instead of structurally missing.
    #[arg(long)]
    pub include_diagonal: bool,
    /// Replace every positive weight by 1 before fitting.
    #[arg(long)]
    pub binarize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SpecArgs {
    /// Model as `regime:K[:C][+sym]`, e.g. `dependent:3:2`. Overrides --regime/--k/--c.
    #[arg(long)]
    pub spec: Option<String>,
    /// independent, dependent, redundant or sca.
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Layer communities (dependent regime only).
    #[arg(long)]
    pub c: Option<usize>,
    /// Undirected model: U = V and symmetric core slices.
    #[arg(long)]
    pub symmetric: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimationArgs {
    /// Master seed; every restart, fold and split seed derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random restarts per fit (default 20, or 50 for SCA).
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    /// Relative KL change that stops the updates.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// averaged-factors, naive or averaged-updates.
    #[arg(long, default_value = "averaged-factors")]
    pub sca_strategy: String,
    /// Upper end of the uniform initialization; by default the initial
    /// reconstruction is scaled to the data mean.
    #[arg(long)]
    pub init_scale: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated regimes.
    #[arg(long, default_value = "dependent,independent,redundant")]
    pub regimes: String,
    /// Node communities: `a..b` (inclusive), `a,b,c` or a single value.
    #[arg(long)]
    pub k: String,
    /// Layer communities for the dependent regime, same syntax as --k.
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// balanced (an exact partition) or iid (independent uniform fold per tube).
    #[arg(long, default_value = "balanced")]
    pub fold_mode: String,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Null model, e.g. `redundant:3`.
    #[arg(long)]
    pub null: String,
    /// Alternative model, e.g. `dependent:3:2`.
    #[arg(long)]
    pub alt: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// standard-lrt or split-lrt.
    #[arg(long, default_value = "standard-lrt")]
    pub kind: String,
    /// Share of observed cells used to fit the alternative (split test).
    #[arg(long, default_value_t = 0.5)]
    pub split_fraction: f64,
    /// entry or tube.
    #[arg(long, default_value = "entry")]
    pub split_granularity: String,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RelativeArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// `auto` or comma-separated layer indices.
    #[arg(long, default_value = "auto")]
    pub basis: String,
    /// Dataset to take layer labels from.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ConsensusArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Planted scenario JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format of the sampled dataset.
    #[arg(long, default_value = "long-tsv")]
    pub format: String,
    /// Replace every positive count by 1.
    #[arg(long)]
    pub binarize: bool,
    #[arg(long)]
    pub out: PathBuf,
}
