//! `ccl`: command-line front end for concept relation analysis.
//!
//! Exit status: 0 success, 2 usage, 3 i/o, 4 format or validation,
//! 5 domain or shape, 6 training divergence, 7 concept absent.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ccl", version, about = "Quantify concept-to-class relations in trained classifiers")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Threshold grid resolution.
    #[arg(long, global = true, default_value_t = 101)]
    pub grid_size: usize,
    /// Held-out accuracy a concept head needs to count as present.
    #[arg(long, global = true, default_value_t = 0.8)]
    pub gate: f64,
    /// Tree leaves need at least this many samples of each present class.
    #[arg(long, global = true, default_value_t = 2)]
    pub min_per_class: usize,
    /// Concept cut `<concept>=<v>`, or `<concept>=<v1>,<v2>,...` for levels.
    #[arg(long = "threshold", global = true, value_name = "CONCEPT=V")]
    pub thresholds: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ccl-out")]
    pub out: PathBuf,
    /// Export manifest whose checksums are verified before running.
    #[arg(long = "manifest", global = true)]
    pub manifests: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with concept sets.
    Synth(SynthArgs),
    /// Train a classifier on CBE1 inputs and a labels file.
    Train(TrainArgs),
    /// Train a concept head at one layer or sweep layers backwards.
    Probe(ProbeArgs),
    /// Write a prediction table for a network and its concept heads.
    Predict(PredictArgs),
    /// Score the four relations between a class and a concept.
    Quantify(QuantifyArgs),
    /// Explain predicted classes with concept trees.
    Tree(TreeArgs),
    /// Rank concepts per class by necessary AUC.
    Rank(RankArgs),
    /// List the samples with the lowest and highest concept output.
    Sort(SortArgs),
    /// Directional-derivative scores next to relation AUCs.
    Tcav(TcavArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Color,
    Caption,
    Flags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Color)]
    pub kind: SynthKind,
    /// Plant the class feature (color pair or caption token) in its class.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub correlated: bool,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub samples_per_class: usize,
    #[arg(long)]
    pub glyph_noise: Option<f64>,
    /// Positives (and as many negatives) per concept set.
    #[arg(long, default_value_t = 3000)]
    pub concept_per_side: usize,
    /// Labelling rule for `--kind flags`.
    #[arg(long, default_value = "(A & B) | (C & D)")]
    pub formula: String,
    /// Sample count for `--kind flags`.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub inputs: PathBuf,
    /// CSV with `sample_id` and `label` columns.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,
    /// Width of the linear embedding layer; defaults to the input width.
    #[arg(long)]
    pub embed: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub positives: PathBuf,
    #[arg(long)]
    pub negatives: PathBuf,
    /// Concept name; defaults to the positives file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
    pub layer: Option<usize>,
    /// Probe from the deepest split backwards, stopping at the first pass.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub inputs: PathBuf,
    /// Concept head `<name>=<path>`; all heads must share a split.
    #[arg(long = "head", value_name = "NAME=PATH")]
    pub heads: Vec<String>,
    /// Split used when no head is given.
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
    /// Labels file whose `sample_id` column names the rows.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    #[arg(long, default_value = "predictions.csv")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct QuantifyArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub class: String,
    #[arg(long)]
    pub concept: String,
    /// Also write the two-threshold surface.
    #[arg(long)]
    pub surface: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeMode {
    Multi,
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TNormArg {
    Product,
    Min,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = TreeMode::Multi)]
    pub mode: TreeMode,
    #[arg(long, value_enum, default_value_t = CriterionArg::Gini)]
    pub criterion: CriterionArg,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Keep sibling leaves that share a label.
    #[arg(long)]
    pub no_merge: bool,
    /// Score each leaf path of the per-class trees as a compound concept.
    #[arg(long)]
    pub compound: bool,
    #[arg(long, value_enum, default_value_t = TNormArg::Product)]
    pub tnorm: TNormArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct SortArgs {
    #[arg(long)]
    pub head: PathBuf,
    /// Network whose front section maps `--inputs` to activations.
    #[arg(long, requires = "inputs", conflicts_with = "activations")]
    pub net: Option<PathBuf>,
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Split activations, used as they are.
    #[arg(long, required_unless_present = "net")]
    pub activations: Option<PathBuf>,
    #[arg(long)]
    pub ids: Option<PathBuf>,
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct TcavArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub positives: PathBuf,
    /// Concept negatives; random samples of `--inputs` when omitted.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// Distribution sample set.
    #[arg(long)]
    pub inputs: PathBuf,
    #[arg(long)]
    pub class: usize,
    /// Split to analyze; the sweep-selected split when omitted.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Restrict derivatives to samples predicted as `--class`.
    #[arg(long)]
    pub class_only: bool,
    #[arg(long)]
    pub name: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
