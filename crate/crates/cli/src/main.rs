use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod resolve;

use resolve::Failure;

#[derive(Parser)]
#[command(name = "qpix", version, about = "Train, sample, evaluate and ablate the quantum image generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes a manifest, a per-epoch CSV log, montages and checkpoints.
    Train(TrainArgs),
    /// Sample images from a checkpoint.
    Generate(GenerateArgs),
    /// Compare generated images with the held-out split, or the two real splits with each other.
    Evaluate(EvaluateArgs),
    /// Run an ablation suite with shared seeds and write a comparison CSV.
    Ablate(AblateArgs),
    /// Summarize a checkpoint, or print the resolved configuration.
    Inspect(InspectArgs),
}

/// Configuration sources. Precedence: defaults, `--config`, `--set`, then the named flags.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// Config file in the `[section] key = value` format.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training seed (also fixes the train/test split).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Number of data qubits; images are 2^(d/2) pixels on a side.
    #[arg(long = "d", value_name = "QUBITS")]
    pub data_qubits: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// none, noise_uniform01, noise_gauss, map_max or calib_knockout:<stage>.
    #[arg(long)]
    pub ablation: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub dataset_images: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dataset_labels: Option<PathBuf>,
    /// Digit to keep, or `all`.
    #[arg(long)]
    pub class: Option<String>,
    /// Any config key, e.g. `--set calibration.tau=3`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum Format {
    #[default]
    Pgm,
    Png,
}

impl From<Format> for qpix::metrics::ImageFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pgm => Self::Pgm,
            Format::Png => Self::Png,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Run directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from a checkpoint. Only --epochs and the dataset paths may change.
    #[arg(long, value_name = "CHECKPOINT")]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Required unless --real-vs-real is given.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset configuration for --real-vs-real.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dataset_images: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dataset_labels: Option<PathBuf>,
    #[arg(long)]
    pub class: Option<String>,
    /// First of the three generation seeds (seed, seed+1, seed+2).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compare the training split with the test split instead of a model.
    #[arg(long)]
    pub real_vs_real: bool,
    /// Permutation rounds for the real-vs-real noise floor.
    #[arg(long, default_value_t = 200)]
    pub rounds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    Noise,
    Mapping,
    Calibration,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    pub suite: Suite,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// First of the three evaluation seeds.
    #[arg(long, default_value_t = 0)]
    pub eval_seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Checkpoint to summarize. Without it, the resolved configuration is printed.
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Generate(a) => commands::generate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Inspect(a) => commands::inspect(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qpix: {f}");
            ExitCode::from(match f {
                Failure::Usage(_) => 2,
                Failure::Runtime(_) => 1,
            })
        }
    }
}
