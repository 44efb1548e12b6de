//! Command-line surface. Flags override keys from the JSON config, so a
//! config file can hold the stable setup while sweeps vary flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "exprstage",
    version,
    about = "Expression-matrix tumor-stage classification pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Parse the matrix and labels, report shapes and class counts
    Validate(DataArgs),
    /// Per-gene differential expression with fold-change gating
    Deg(DegArgs),
    /// ANOVA-F feature selection at a false-positive-rate threshold
    Select(SelectArgs),
    /// Fit PCA or ICA and write the transformed matrix
    Transform(TransformArgs),
    /// Expand a dataset with SMOTE, SFA, or Gaussian-noise copies
    Augment(AugmentArgs),
    /// Fit the configured model on the full dataset and dump it
    Train(ModelArgs),
    /// Predict stages for a matrix with a trained pipeline dump
    Predict(PredictArgs),
    /// Grid-search hyperparameters by cross-validated weighted F1
    Grid(ModelArgs),
    /// One stratified split: fit on train, score the held-out test
    Evaluate(EvalArgs),
    /// Whole-pipeline k-fold cross-validation
    Cv(CvArgs),
    /// Repeated random-split trials with mean and best summaries
    Trials(TrialsArgs),
    /// Full run: reports, trials, a refit dump, and a manifest
    Pipeline(ModelArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationArg {
    SamplesRows,
    GenesRows,
}

#[derive(Args)]
pub struct CommonArgs {
    /// JSON run config; the flags below override its keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Expression matrix (tab-delimited text)
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Sample-to-stage label table (tab-delimited text)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Which axis of the matrix holds samples
    #[arg(long, value_enum)]
    pub orientation: Option<OrientationArg>,
    /// Apply log2(x + 1) to every value at ingestion
    #[arg(long)]
    pub log2: bool,
    /// Master seed for every stochastic stage
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, env = "EXPRSTAGE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct DegArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Significance threshold on the t-test p-value
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Absolute log2 fold-change threshold
    #[arg(long)]
    pub lfc: Option<f64>,
    /// Use the unequal-variance (Welch) t-test
    #[arg(long)]
    pub welch: bool,
}

#[derive(Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Keep features with ANOVA p < alpha
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformMethodArg {
    Pca,
    Ica,
}

#[derive(Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub method: Option<TransformMethodArg>,
    /// Number of components to keep
    #[arg(long)]
    pub components: Option<usize>,
    /// ICA iteration cap
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// ICA convergence tolerance
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentMethodArg {
    Smote,
    Sfa,
    Gaussian,
}

#[derive(Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub method: Option<AugmentMethodArg>,
    /// SMOTE neighbor count
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    /// SMOTE target: minority = ceil(ratio x majority); default balances
    #[arg(long)]
    pub ratio: Option<f64>,
    /// SFA multiplicative-noise mean, or Gaussian additive offset
    #[arg(long)]
    pub mu: Option<f64>,
    /// SFA multiplicative-noise standard deviation
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// SFA additive-noise standard deviation
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Gaussian noise standard deviation
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Gaussian expansion factor (output = factor x input rows)
    #[arg(long)]
    pub factor: Option<usize>,
    /// Treat --sigma as absolute instead of relative to feature spread
    #[arg(long)]
    pub absolute: bool,
}

#[derive(Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fit this classifier kind with default parameters
    /// (dt, rf, knn, nb, lr, svm, gbt, mlp)
    #[arg(long)]
    pub classifier: Option<String>,
    /// Sweep the published grid for this classifier kind
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Held-out share of samples
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fold count
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Args)]
pub struct TrialsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of repeated random-split runs
    #[arg(long)]
    pub runs: Option<usize>,
    /// Held-out share of samples per run
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Trained pipeline dump (output of `train` or `pipeline`)
    #[arg(long)]
    pub model: PathBuf,
    /// Expression matrix to predict on
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum)]
    pub orientation: Option<OrientationArg>,
    #[arg(long)]
    pub log2: bool,
    /// Output directory
    #[arg(long, env = "EXPRSTAGE_OUT")]
    pub out: Option<PathBuf>,
}
