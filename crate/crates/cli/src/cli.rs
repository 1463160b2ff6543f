use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tapkit_core::ModelConfig;

fn defaults() -> ModelConfig {
    ModelConfig::default()
}

#[derive(Debug, Parser)]
#[command(name = "tapkit", version, about = "Model, evaluate and serve perceived tappability of mobile UI elements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic planted-rule corpus and its embedding table.
    Synth(SynthArgs),
    /// Train a model on a corpus and write a checkpoint.
    Train(TrainArgs),
    /// K-fold cross validation plus the clickable-attribute baseline.
    Eval(EvalArgs),
    /// Per-element predictions for one screen.
    Predict(PredictArgs),
    /// Signifier analytics: heatmaps, types, sizes, words, colors, keywords.
    Analyze(AnalyzeArgs),
    /// Rater agreement, Fleiss' kappa and model consistency bins.
    Agreement(AgreementArgs),
    /// Serve a checkpoint over HTTP.
    Serve(ServeArgs),
    /// Render a heatmap, palette or consistency scatter to PNG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of screens to generate.
    #[arg(long, default_value_t = 100)]
    pub screens: usize,
    /// Ratings per element; more than one produces a consistency corpus.
    #[arg(long, default_value_t = 1)]
    pub raters: usize,
    /// Probability that an element's clickable attribute contradicts its planted label.
    #[arg(long, default_value_t = 0.2)]
    pub disagreement: f64,
    /// Minimum distance of element centers from the decision threshold (fraction of height).
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Stop once this many labeled examples exist.
    #[arg(long)]
    pub max_examples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Word-embedding table [default: <corpus>/embeddings.txt].
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Element type vocabulary, one class name per line [default: built-in 22 types].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = defaults().seed)]
    pub seed: u64,
    /// Optimizer steps.
    #[arg(long, default_value_t = defaults().steps)]
    pub steps: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = defaults().batch_size)]
    pub batch: usize,
    /// Adagrad learning rate.
    #[arg(long, default_value_t = defaults().learning_rate)]
    pub lr: f64,
    /// Dropout rate on the fully connected layers.
    #[arg(long, default_value_t = defaults().dropout)]
    pub dropout: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Checkpoint file to write.
    #[arg(long, default_value = "model.tapk")]
    pub checkpoint: PathBuf,
    /// Share of examples held out to calibrate the decision threshold.
    #[arg(long, default_value_t = defaults().holdout_fraction)]
    pub holdout: f64,
    /// Directory for the training report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 10)]
    pub k_folds: usize,
    /// Directory for `eval.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Word-embedding table [default: <corpus>/embeddings.txt].
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Screenshot PNG (with --hierarchy).
    #[arg(long, requires = "hierarchy", conflicts_with = "corpus")]
    pub screenshot: Option<PathBuf>,
    /// View hierarchy JSON (with --screenshot).
    #[arg(long, requires = "screenshot")]
    pub hierarchy: Option<PathBuf>,
    /// Corpus to take the screen from (with --screen).
    #[arg(long, requires = "screen")]
    pub corpus: Option<PathBuf>,
    /// Screen id within --corpus.
    #[arg(long, requires = "corpus")]
    pub screen: Option<String>,
    /// Decision threshold in (0, 1) [default: the checkpoint's calibrated threshold].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Write the predictions as JSON to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Element type vocabulary [default: built-in 22 types].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Output directory for the reports.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Palette size per class.
    #[arg(long, default_value_t = 10)]
    pub colors: usize,
    /// Pixels sampled per element for the palettes.
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    /// Keywords reported per class.
    #[arg(long, default_value_t = 5)]
    pub top_n: usize,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Corpus directory with ratings.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Element type vocabulary [default: built-in 22 types].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Checkpoint for consistency bins (needs exactly five ratings per element).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Word-embedding table [default: <corpus>/embeddings.txt].
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output directory for the reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Pick from the report's `kind` field.
    Auto,
    Heatmap,
    Palette,
    Scatter,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Report JSON written by `analyze` or `agreement`.
    #[arg(long)]
    pub input: PathBuf,
    /// PNG file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PlotKind::Auto)]
    pub kind: PlotKind,
    /// Seed for the horizontal jitter of scatter points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
