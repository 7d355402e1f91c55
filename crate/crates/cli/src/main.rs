mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relate_core::attacks::AttackKind;
use relate_core::models::Architecture;
use relate_core::pipeline::Objective;
use relate_core::similarity::Metric;

use crate::config::{Manifest, Settings};

/// Attack detection, attack-group classification and similarity-driven
/// model selection for multivariate time series.
#[derive(Debug, Parser)]
#[command(name = "relate", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment manifest (TOML); command-line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for every random draw [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Attack budget in [0, 1] [default: 0.1]
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Detection threshold T in (0, 0.5) [default: 0.13]
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Detector calibration percentile in (50, 100) [default: 99]
    #[arg(long, global = true)]
    percentile: Option<f64>,

    /// Similarity metric: cosine, dtw or wasserstein [default: cosine]
    #[arg(long, global = true)]
    metric: Option<Metric>,

    /// Performance benchmark database directory [default: pbd]
    #[arg(long, global = true, value_name = "PATH")]
    pbd: Option<PathBuf>,

    /// Output path; the default depends on the command
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory
    Synth(SynthArgs),
    /// Attack a dataset's validation split and write it as an arrival
    Attack(AttackArgs),
    /// Build the performance benchmark database
    PbdBuild(PbdBuildArgs),
    /// Report the fused detection rate and case of an arrival
    Detect(DataArgs),
    /// Predict the attack group of an arrival
    ClassifyAttack(DataArgs),
    /// Choose the most similar benchmark dataset and its top-3 models
    Select(DataArgs),
    /// Run the whole selection pipeline and evaluate the result
    Run(RunArgs),
    /// Evaluate a zoo on an arrival with oracle, random and worst baselines
    EvalBaselines(EvalArgs),
    /// Print benchmark records or a saved run result
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    #[arg(long, default_value_t = 64)]
    length: usize,
    /// Samples per class
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    /// Selects the class layout; equal variants share class shapes
    #[arg(long, default_value_t = 0)]
    variant: u64,
    /// Gaussian noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Debug, Args)]
struct AttackArgs {
    /// Dataset directory
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Attack applied to the whole validation split
    #[arg(long, conflicts_with = "pattern")]
    kind: Option<AttackKind>,
    /// Five comma-separated segments, each `clean` or an attack name
    #[arg(long)]
    pattern: Option<String>,
    /// Attacker architecture, trained on the dataset's train split
    #[arg(long, default_value = "mlp")]
    model: Architecture,
}

#[derive(Debug, Args)]
struct PbdBuildArgs {
    /// Dataset directories; synthetic benchmark datasets when omitted
    #[arg(long, value_name = "DIR", num_args = 1..)]
    data: Vec<PathBuf>,
    /// Number of synthetic benchmark datasets
    #[arg(long, default_value_t = 4)]
    datasets: usize,
    /// Training epochs per grid point
    #[arg(long, default_value_t = 30)]
    epochs: usize,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Arrival or dataset directory
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Arrival directory; a held-out synthetic sibling when omitted
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Benchmark dataset the sibling is drawn from
    #[arg(long, default_value_t = 0)]
    source: usize,
    /// Attack applied to the sibling's validation split
    #[arg(long, conflicts_with = "pattern")]
    attack: Option<AttackKind>,
    /// Five comma-separated segments, each `clean` or an attack name
    #[arg(long)]
    pattern: Option<String>,
    /// Synthetic datasets in a PBD built on demand
    #[arg(long, default_value_t = 4)]
    datasets: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Arrival directory
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Use the tuned zoo of this PBD dataset instead of the default zoo
    #[arg(long)]
    dataset: Option<String>,
    /// accuracy or asr; follows the arrival's condition when omitted
    #[arg(long)]
    objective: Option<Objective>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Saved run result (JSON) to print instead of the PBD records
    #[arg(long, value_name = "FILE")]
    result: Option<PathBuf>,
    /// Only rows of this dataset
    #[arg(long)]
    dataset: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> error::Result<()> {
    let g = cli.global;
    let manifest = match &g.config {
        Some(p) => Manifest::read(p)?,
        None => Manifest::default(),
    };
    let flags = Manifest {
        seed: g.seed,
        epsilon: g.epsilon,
        threshold: g.threshold,
        percentile: g.percentile,
        metric: g.metric,
        pbd: g.pbd,
        out: g.out,
        jobs: g.jobs,
    };
    let settings = Settings::resolve(flags, manifest);
    settings.run_config()?;
    if let Some(n) = settings.jobs {
        relate_core::pipeline::configure_jobs(n)?;
    }

    match cli.command {
        Command::Synth(a) => commands::synth(&settings, a),
        Command::Attack(a) => commands::attack(&settings, a),
        Command::PbdBuild(a) => commands::pbd_build(&settings, a),
        Command::Detect(a) => commands::detect(&settings, a),
        Command::ClassifyAttack(a) => commands::classify_attack(&settings, a),
        Command::Select(a) => commands::select(&settings, a),
        Command::Run(a) => commands::run(&settings, a),
        Command::EvalBaselines(a) => commands::eval_baselines(&settings, a),
        Command::Report(a) => commands::report(&settings, a),
    }
}
