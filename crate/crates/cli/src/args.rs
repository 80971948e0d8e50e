use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use picm::{Budget, LevelGrid, ScaleLaw, Strategy};

/// Progressive trit-plane latent codec and adaptive decoding experiments.
///
/// All randomness comes from explicit seeds. Set PICM_THREADS to cap
/// parallelism.
#[derive(Debug, Parser)]
#[command(name = "picm", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic latent grids.
    Gen(GenArgs),
    /// Encode a latent grid into a progressive stream.
    Encode(EncodeArgs),
    /// Decode a stream prefix into a latent grid.
    Decode(DecodeArgs),
    /// Dump the transmission order of a grid as CSV.
    Priority(PriorityArgs),
    /// Rate and distortion at every decoding level, as CSV.
    RateCurve(RateCurveArgs),
    /// Train the stopping filter.
    FilterTrain(FilterTrainArgs),
    /// Run threshold-stopped decoding and write traces.
    Adaptive(AdaptiveArgs),
    /// Expected calibration error of (p, correct) decisions.
    Ece(EceArgs),
    /// Bjøntegaard deltas between two rate-accuracy curves.
    Bd(BdArgs),
}

/// H,W,C
#[derive(Debug, Clone, Copy)]
pub struct Shape(pub usize, pub usize, pub usize);

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split([',', 'x'])
            .map(|p| p.trim().parse().map_err(|_| format!("bad dimension {p:?}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [h, w, c] => Ok(Shape(h, w, c)),
            _ => Err(format!("expected H,W,C, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Latent shape H,W,C.
    #[arg(long, default_value = "8,8,32")]
    pub shape: Shape,
    /// constant:S or loguniform:LO:HI
    #[arg(long, default_value = "loguniform:0.1:10")]
    pub scale_law: ScaleLaw,
    /// Output file (single grid).
    #[arg(long, conflicts_with_all = ["out_dir", "count"], required_unless_present = "out_dir")]
    pub out: Option<PathBuf>,
    /// Output directory for a batch; files are grid_NNNNN.picl with seeds
    /// seed, seed+1, ...
    #[arg(long, requires = "count")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct ClassifierArgs {
    /// Classes of the synthetic classifier.
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub classifier_seed: u64,
}

#[derive(Debug, Args, Clone)]
pub struct CodecArgs {
    /// Seed for the random strategy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform checkpoints in the cut table.
    #[arg(long, default_value_t = picm::codec::DEFAULT_CHECKPOINTS)]
    pub checkpoints: u32,
    /// Clamp coefficients outside the representable range instead of failing.
    #[arg(long)]
    pub clamp_range: bool,
    /// Allow oracle strategies by writing their group order to the stream.
    #[arg(long)]
    pub transmit_order: bool,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
}

#[derive(Debug, Args, Clone)]
pub struct CodingArgs {
    #[arg(long, default_value = "expvar")]
    pub strategy: Strategy,
    #[command(flatten)]
    pub codec: CodecArgs,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub coding: CodingArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// bytes:N, level:K, plane:P or full
    #[arg(long, default_value = "full")]
    pub budget: Budget,
    /// Decoded grid (centered values, dequantized means and scales).
    #[arg(long)]
    pub out: PathBuf,
    /// Original grid, to report latent MSE.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PriorityArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "expvar")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
}

#[derive(Debug, Args)]
pub struct RateCurveArgs {
    /// Input grids.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "expvar")]
    pub strategy: Vec<Strategy>,
    #[arg(long, default_value = "checkpoints")]
    pub levels: LevelGrid,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterTrainArgs {
    /// Training grids.
    #[arg(long, num_args = 1.., required_unless_present = "logits_csv", conflicts_with = "logits_csv")]
    pub inputs: Vec<PathBuf>,
    /// Train on externally computed logits instead.
    #[arg(long)]
    pub logits_csv: Option<PathBuf>,
    #[arg(long, default_value = "checkpoints")]
    pub levels: LevelGrid,
    #[command(flatten)]
    pub coding: CodingArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    /// Model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Training rows as CSV.
    #[arg(long)]
    pub rows_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdaptiveArgs {
    #[arg(long, num_args = 1.., required_unless_present = "logits_csv", conflicts_with = "logits_csv")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub logits_csv: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
    #[arg(long, default_value = "checkpoints")]
    pub levels: LevelGrid,
    #[command(flatten)]
    pub coding: CodingArgs,
    /// Directory for trace_tau<T>.csv and decisions_tau<T>.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EceArgs {
    /// CSV with `p` and `correct` columns, e.g. a decisions file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Per-bin reliability table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BdArgs {
    /// Reference curve: CSV with `rate` and `accuracy` columns.
    #[arg(long)]
    pub a: PathBuf,
    /// Test curve.
    #[arg(long)]
    pub b: PathBuf,
}
