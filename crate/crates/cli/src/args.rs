use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "labelsift",
    version,
    about = "Find likely-mislabeled instances in classification datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for internal parallelism [default: all cores]
    #[arg(long, global = true, env = "LABELSIFT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank instances by how suspicious their labels are
    Detect(DetectArgs),
    /// Flip a fraction of the labels and record which ones changed
    Inject(InjectArgs),
    /// Measure alpha-precision and alpha-recall on artificially noised data
    Benchmark(BenchmarkArgs),
    /// Write a synthetic dataset as CSV
    Generate(GenerateArgs),
    /// Print a summary of a dataset
    Inspect(InspectArgs),
}

/// Dataset source. Exactly one of `--data`, `--images` or `--corpus` is used.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV table with one instance per row
    #[arg(long, conflicts_with_all = ["images", "corpus"])]
    pub data: Option<PathBuf>,

    /// IDX image file (requires --labels)
    #[arg(long, requires = "labels", conflicts_with = "corpus")]
    pub images: Option<PathBuf>,

    /// Text corpus with one document per line (requires --labels and --embeddings)
    #[arg(long, requires_all = ["labels", "embeddings"])]
    pub corpus: Option<PathBuf>,

    /// Label file: IDX labels for --images, one label per line for --corpus
    #[arg(long)]
    pub labels: Option<PathBuf>,

    /// Word embeddings in word2vec text format
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// The CSV has no header row
    #[arg(long)]
    pub no_header: bool,

    /// CSV label column, by name or zero-based index
    #[arg(long, default_value = "label")]
    pub label_column: String,

    /// Replicate grayscale images to three channels
    #[arg(long)]
    pub replicate_channels: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Fraction of the dataset to return for review, in (0, 1]
    #[arg(long)]
    pub alpha: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// JSON report path
    #[arg(long, short, default_value = "suspects.json")]
    pub output: PathBuf,

    /// Also write the report as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Keep the score of every instance in memory
    #[arg(long)]
    pub retain_full_scores: bool,

    /// Write per-fold cross-validation scores as CSV
    #[arg(long)]
    pub cv_trace: Option<PathBuf>,

    /// Save the trained classifier
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    /// Any other class, uniformly
    CompletelyAtRandom,
    /// Another class of the same group
    AtRandom,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Fraction of labels to flip, in (0, 1)
    #[arg(long, default_value_t = 0.03)]
    pub mu: f64,

    #[arg(long, value_enum, default_value_t = Regime::CompletelyAtRandom)]
    pub regime: Regime,

    /// JSON map from group name to class names (required for at-random)
    #[arg(long)]
    pub groups: Option<PathBuf>,

    /// Use the bundled CIFAR-100 superclass groups
    #[arg(long, conflicts_with = "groups")]
    pub cifar100_groups: bool,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub noise: NoiseArgs,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Noisy labels: a CSV table for --data, an IDX label file for --images,
    /// one label per line for --corpus
    #[arg(long, short)]
    pub output: PathBuf,

    /// Noise record JSON path [default: OUTPUT with a .record.json suffix]
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SyntheticKind {
    Blobs,
    Classification,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// Benchmark on a generated dataset instead of a file
    #[arg(long, value_enum, conflicts_with_all = ["data", "images", "corpus"])]
    pub synthetic: Option<SyntheticKind>,

    /// Instances
    #[arg(long, default_value_t = 4000)]
    pub n: usize,

    /// Features
    #[arg(long, default_value_t = 12)]
    pub d: usize,

    /// Classes
    #[arg(long, default_value_t = 12)]
    pub c: usize,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub synthetic: SyntheticArgs,

    #[command(flatten)]
    pub noise: NoiseArgs,

    /// Review fractions to evaluate
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03")]
    pub alphas: Vec<f64>,

    #[arg(long, default_value_t = 5)]
    pub runs: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Dataset name shown in the table [default: file stem or generator]
    #[arg(long)]
    pub name: Option<String>,

    /// JSON report path
    #[arg(long, short, default_value = "benchmark.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: SyntheticKind,

    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub d: usize,

    #[arg(long)]
    pub c: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
}
