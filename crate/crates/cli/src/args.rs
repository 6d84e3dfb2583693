use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmix_core::{MaskFamily, Policy, DEFAULT_ALPHA, DEFAULT_DELTA};

#[derive(Debug, Clone, Parser)]
#[command(name = "fmix", version, about = "Fourier-space mask generation and mixed-sample augmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a stack of FMix or CutMix masks (or the grey fields behind them).
    GenMask(GenMaskArgs),
    /// Mix two stacked tensors sample by sample.
    Mix(MixArgs),
    /// Per-item diagnostics for a mask or grey-field stack, as CSV.
    Stats(StatsArgs),
    /// Render 2D masks or images as 8-bit greyscale PGM or PNG.
    Visualize(VisualizeArgs),
}

/// Grid shape written as `AxBxC`, e.g. `32x32`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dims = s
            .split(['x', 'X'])
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("'{s}' is not of the form AxBxC"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dims(dims))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join("x"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Npy,
    Pgm,
    Png,
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Npy => "npy",
            OutputFormat::Pgm => "pgm",
            OutputFormat::Png => "png",
            OutputFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    /// Beta(alpha, alpha) concentration for the mixing coefficient.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Decay power of the low-pass filter.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Fixed mixing coefficient; overrides Beta sampling.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Base seed; item or batch k draws from stream k.
    #[arg(long, env = "FMIX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GenMaskArgs {
    /// Grid shape, one to three axes, e.g. `64`, `32x32`, `16x16x16`.
    #[arg(long)]
    pub dims: Dims,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value = "fmix")]
    pub family: MaskFamily,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Output file; the JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Npy)]
    pub format: OutputFormat,
    /// Write the float32 grey fields instead of thresholded masks (fmix only).
    #[arg(long)]
    pub grey: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MixArgs {
    /// First parent stack; its first axis is the sample axis.
    #[arg(long)]
    pub a: PathBuf,
    /// Second parent stack, same shape and dtype as `--a`.
    #[arg(long)]
    pub b: PathBuf,
    /// fmix, cutmix, mixup or alternate (fmix and mixup in turn).
    #[arg(long = "family", default_value = "fmix")]
    pub policy: Policy,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Samples per batch; each batch draws one coefficient. Defaults to the
    /// whole stack.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Treat the first per-sample axis as channels and mask the rest.
    #[arg(long)]
    pub channels_first: bool,
    /// Draw a coefficient per sample instead of per batch.
    #[arg(long)]
    pub per_sample_lambda: bool,
    /// Use one mask for a whole batch.
    #[arg(long)]
    pub shared_mask: bool,
    /// Mixed stack; the JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the masks used; defaults to `<out>.masks.npy`.
    #[arg(long)]
    pub masks_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsKind {
    /// uint8 files are masks, float32 files are grey fields.
    Auto,
    Mask,
    Grey,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// NPY stack with items along the first axis.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = StatsKind::Auto)]
    pub kind: StatsKind,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VisualizeArgs {
    /// A 2D array, or a stack of them along the first axis.
    #[arg(long)]
    pub input: PathBuf,
    /// Image path. Stacks are written as `<stem>_<index>.<ext>`.
    #[arg(long)]
    pub out: PathBuf,
    /// pgm or png; inferred from `--out` when omitted.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Render only this item of a stack.
    #[arg(long)]
    pub index: Option<usize>,
}
