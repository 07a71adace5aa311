//! `octseg`: layered-image segmentation CLI.
//!
//! Subcommands: `synth` (phantom generation), `train` (shape model),
//! `segment` (contour evolution on one image), `eval` (Hausdorff tables).
//!
//! Exit codes: 0 success, 2 unwritable output path, 3 diverged
//! segmentation (partial trace still written), 1 anything else.
//! Set `RUST_LOG` for progress logging.

mod commands;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "octseg",
    version,
    about = "Layered grayscale image segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic layered phantoms with ground-truth annotations.
    Synth(SynthArgs),
    /// Train a PCA shape model from annotation files.
    Train(TrainArgs),
    /// Segment one image with a trained model.
    Segment(SegmentArgs),
    /// Compare predictions against ground truth and write a CSV table.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Number of phantoms.
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    /// Variance of the multiplicative speckle noise (0 = noise-free).
    #[arg(long = "speckle-var", default_value_t = 0.8)]
    pub speckle_var: f64,
    /// Per-boundary depth jitter range in pixels.
    #[arg(long = "depth-jitter", default_value_t = 2.0)]
    pub depth_jitter: f64,
    /// Shared amplitude jitter (relative).
    #[arg(long = "amp-jitter", default_value_t = 0.0)]
    pub amp_jitter: f64,
    /// Shared phase jitter in radians.
    #[arg(long = "phase-jitter", default_value_t = 0.0)]
    pub phase_jitter: f64,
    /// Control points per boundary stored in the shape annotations.
    #[arg(long = "points-per-boundary", default_value_t = 40)]
    pub points_per_boundary: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Glob over annotation files (quote it in the shell).
    #[arg(long)]
    pub annotations: String,
    /// Output model file.
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Fraction of total variance the retained modes must cover.
    #[arg(long, default_value_t = 0.98)]
    pub variance: f64,
    #[arg(long = "points-per-boundary", default_value_t = 40)]
    pub points_per_boundary: usize,
}

#[derive(Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: std::path::PathBuf,
    #[arg(long)]
    pub model: std::path::PathBuf,
    /// Output result document (JSON).
    #[arg(long)]
    pub out: std::path::PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Narrowband radius |s| in pixels.
    #[arg(long, default_value_t = 10)]
    pub band: u32,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Initialization: mean | flat | offset.
    #[arg(long, default_value = "mean")]
    pub init: String,
    /// Top row for --init flat.
    #[arg(long = "flat-top")]
    pub flat_top: Option<f64>,
    /// Bottom row for --init flat.
    #[arg(long = "flat-bottom")]
    pub flat_bottom: Option<f64>,
    /// Extra shift for --init offset.
    #[arg(long = "offset-x", default_value_t = 0.0)]
    pub offset_x: f64,
    #[arg(long = "offset-y", default_value_t = 0.0)]
    pub offset_y: f64,
    /// Apply shape correction every this many iterations.
    #[arg(long = "correct-every", default_value_t = 1)]
    pub correct_every: usize,
    /// Stop once displacement stays below 1e-4 px for 10 iterations.
    #[arg(long = "early-stop", default_value_t = false)]
    pub early_stop: bool,
    /// Optional overlay rendering of the final curves.
    #[arg(long)]
    pub render: Option<std::path::PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Glob over prediction result files.
    #[arg(long)]
    pub pred: String,
    /// Glob over ground-truth annotation files, matched to predictions in
    /// sorted order.
    #[arg(long)]
    pub truth: String,
    /// Output CSV table.
    #[arg(long)]
    pub out: std::path::PathBuf,
    /// Method label for the table row.
    #[arg(long, default_value = "proposed")]
    pub method: String,
}

/// A failure with its process exit code.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn from_core(err: octseg_core::Error) -> Failure {
        let code = match err {
            octseg_core::Error::Diverged { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

impl From<octseg_core::Error> for Failure {
    fn from(err: octseg_core::Error) -> Failure {
        Failure::from_core(err)
    }
}

/// Wraps write-path results so filesystem failures exit with code 2.
pub fn written<T>(result: octseg_core::error::Result<T>) -> Result<T, Failure> {
    result.map_err(|err| match err {
        octseg_core::Error::Io(_) | octseg_core::Error::Image(_) => Failure {
            code: 2,
            message: err.to_string(),
        },
        other => Failure::from_core(other),
    })
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(args) => commands::synth(&args),
        Command::Train(args) => commands::train(&args),
        Command::Segment(args) => commands::segment(&args),
        Command::Eval(args) => commands::eval(&args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
