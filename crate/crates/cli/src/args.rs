use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msapdm::attention::KernelRounding;
use msapdm::benchmark::BenchMode;
use msapdm::blocks::ScaleFeed;
use msapdm::dataio::Split;
use msapdm::network::Variant;

#[derive(Debug, Parser)]
#[command(name = "msapdm", version, about = "Train, evaluate and benchmark MSAP-DM activity recognition models")]
pub struct Cli {
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic windowed activity dataset.
    Synth(SynthArgs),
    /// Window a labelled sensor CSV into a dataset file.
    Window(WindowArgs),
    /// Train a model and save the best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset.
    Eval(EvalArgs),
    /// Measure inference latency against the real-time budget.
    Bench(BenchArgs),
    /// Run the finite-difference gradient check suite.
    Gradcheck(GradcheckArgs),
    /// Train the five ablation variants and tabulate their test metrics.
    Ablate(AblateArgs),
    /// Time, memory and parameter count for the four reference dataset shapes.
    Complexity(ComplexityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Window(_) => "window",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
            Command::Gradcheck(_) => "gradcheck",
            Command::Ablate(_) => "ablate",
            Command::Complexity(_) => "complexity",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Window length in samples.
    #[arg(long)]
    pub window: Option<usize>,
    /// Sampling rate in Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON config file; its `synth` section overrides flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub csv: PathBuf,
    /// Label column name.
    #[arg(long)]
    pub label: String,
    /// Comma-separated channel column names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub channels: Vec<String>,
    /// Subject column; windows never cross subjects.
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub window: usize,
    /// Hop between window starts (default: half the window).
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// `<msap>,<denoise>`, e.g. `purified,drsn-m` or `base,no-denoise`.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub scales: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub blocks_per_group: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<ScaleFeed>)]
    pub scale_feed: Option<ScaleFeed>,
    #[arg(long, value_parser = parse_from_str::<KernelRounding>)]
    pub eca_rounding: Option<KernelRounding>,
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train/val/test ratios, e.g. `8:1:1`.
    #[arg(long, value_parser = parse_ratios)]
    pub split: Option<[u32; 3]>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds model initialisation, batch shuffling and the split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON-lines history (default: `<out>.history.jsonl`).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_from_str::<Split>)]
    pub split: Split,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// Also write the metrics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint to benchmark (default: a freshly initialised model).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Reference dataset shape: PAMAP2, WISDM, OPPORTUNITY or UCI-HAR.
    #[arg(long, conflicts_with = "model")]
    pub preset: Option<String>,
    #[arg(long, default_value = "stream", value_parser = parse_from_str::<BenchMode>)]
    pub mode: BenchMode,
    /// Duration of one window; defaults to the preset's or 4.5 s.
    #[arg(long)]
    pub window_seconds: Option<f64>,
    /// Timed inferences.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Burst mode only: push all windows through as one batch.
    #[arg(long)]
    pub batched: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds; every variant is trained once per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Restrict to these presets (default: all four).
    #[arg(long, value_delimiter = ',')]
    pub presets: Option<Vec<String>>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_from_str<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

fn parse_ratios(s: &str) -> Result<[u32; 3], String> {
    msapdm::dataio::SplitSpec::parse_ratios(s).map_err(|e| e.to_string())
}
