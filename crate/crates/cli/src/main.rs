//! `combnet`: dataset synthesis, training, evaluation, cost reports, filter
//! responses, sweeps and checkpoint inspection.

/// `println!` that ends the process quietly when stdout is a closed pipe,
/// e.g. `combnet inspect ... | head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("failed printing to stdout: {e}");
        }
    }};
}

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "combnet", version, about = "Learnable comb filter banks for audio")]
struct Cli {
    /// Root for default output locations.
    #[arg(long, global = true, env = "COMBNET_OUT", default_value = "combnet-out")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic note dataset (WAV clips, label CSVs, manifests).
    Synth(SynthArgs),
    /// Train a network from a TOML run configuration.
    Train(TrainArgs),
    /// Frame-wise F1 of a checkpoint, or of prediction CSVs, on a split.
    Eval(EvalArgs),
    /// Cost report and comb layer throughput for a model spec.
    Bench(BenchArgs),
    /// Magnitude response of a single comb filter.
    Respond(RespondArgs),
    /// Train CombNet and ConvNet over a range of channel counts.
    Sweep(SweepArgs),
    /// Per-channel comb parameters of a checkpoint or a fresh initialisation.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory [default: <out-root>/data].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    valid: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Print progress at every evaluation.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Training,
    Inference,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["checkpoint", "predictions"]))]
struct EvalArgs {
    /// Manifest of the split to score.
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of prediction CSVs laid out like the dataset's label files.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Comb evaluation path used for checkpoints.
    #[arg(long, value_enum, default_value = "training")]
    mode: ModeArg,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Model spec TOML (the `[model]` table of a run config, on its own).
    #[arg(long)]
    spec: PathBuf,
    /// Length of the benchmark signal.
    #[arg(long, default_value_t = 4.0)]
    seconds: f64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

#[derive(Debug, Args)]
struct RespondArgs {
    #[arg(long)]
    f0: f64,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 16_000)]
    fs: u32,
    #[arg(long)]
    out: PathBuf,
    /// Also probe the recursive filter with sinusoids at the first five
    /// harmonics and anti-resonances, and write the probe outputs here.
    #[arg(long)]
    measure: Option<PathBuf>,
    /// Also render the analytic curve as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Dataset directory holding the manifests.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory [default: <out-root>/sweep].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64, 128])]
    channels: Vec<usize>,
    /// Print the planned configurations and stop.
    #[arg(long)]
    dry_run: bool,
    /// Train configurations concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32_768)]
    crop_samples: usize,
    #[arg(long, default_value_t = 100)]
    eval_interval: usize,
    /// Validate on the first N clips (0 = all).
    #[arg(long, default_value_t = 0)]
    max_valid_clips: usize,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("what").required(true).args(["checkpoint", "init_channels"]))]
struct InspectArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Inspect a fresh comb bank with this many channels instead.
    #[arg(long)]
    init_channels: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200.0)]
    f_min_hz: f64,
    #[arg(long, default_value_t = 500.0)]
    f_max_hz: f64,
    #[arg(long, default_value_t = 16_000)]
    fs: u32,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(&cli.out_root, a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Respond(a) => commands::respond(a),
        Command::Sweep(a) => commands::sweep(&cli.out_root, a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
