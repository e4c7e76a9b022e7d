//! `gsnet`: descriptor extraction, graph dumps, sampling, training,
//! evaluation and rotation-robustness runs from the command line.
//!
//! Results go to standard output as one JSON document (or a human rendering
//! with `--pretty`). Exit codes: 0 success, 2 argument error, 3 data error,
//! 4 numeric failure.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gsnet", version, about = "Eigen-Graph descriptors and GS-Net experiments")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "GSNET_THREADS")]
    threads: Option<usize>,

    /// Human-readable rendering instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-point eigenvalues of the local structure tensor.
    Descriptors(DescriptorsArgs),
    /// Euclidean and eigenvalue-space neighbor rows of every point.
    Knn(KnnArgs),
    /// Farthest-point (or stride) subsample of a cloud.
    Fps(FpsArgs),
    /// Train a network from an experiment manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Accuracy per rotation protocol for the manifest recipe and the eigen-only recipe.
    Robustness(RobustnessArgs),
    /// Generate a synthetic corpus, optionally writing it as XYZ files.
    Synth(SynthArgs),
    /// Compare backprop gradients of a small network with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct InputArgs {
    /// Cloud file (.xyz, .off or .ply).
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the format implied by the extension.
    #[arg(long, value_name = "xyz|off|ply")]
    pub input_format: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpFormat {
    Csv,
    Jsonl,
}

#[derive(Args, Debug, Serialize)]
pub struct DescriptorsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 20)]
    pub k1: usize,
    /// Also list the k2 nearest neighbors in eigenvalue space.
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long, value_enum, default_value_t = DumpFormat::Csv)]
    pub format: DumpFormat,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct KnnArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 20)]
    pub k1: usize,
    #[arg(long, default_value_t = 20)]
    pub k2: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerArg {
    Fps,
    Stride,
}

#[derive(Args, Debug, Serialize)]
pub struct FpsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of points to keep.
    #[arg(long)]
    pub m: usize,
    /// Index of the first selected point.
    #[arg(long, default_value_t = 0)]
    pub seed_index: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Fps)]
    pub sampler: SamplerArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the selected points as XYZ.
    #[arg(long)]
    pub points_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Experiment manifest; the built-in desk experiment when absent.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Receives manifest.json, log.jsonl, checkpoint.json and metrics.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the manifest's epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// A manifest (its protocol is applied) or a bare dataset spec.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(Args, Debug, Serialize)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated list of z/z, z/s, s/s, 0/s, none.
    #[arg(long, default_value = "z/z,z/s,s/s,0/s")]
    pub protocols: String,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Part-labeled corpus instead of the shape-classification one.
    #[arg(long)]
    pub parts: bool,
    /// Comma-separated subset of sphere, cube, cylinder, plane, torus.
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long, default_value_t = 256)]
    pub points: usize,
    /// Clouds per class (per category with --parts).
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes every cloud as XYZ and a dataset.json listing them.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GradcheckArgs {
    /// Network config JSON; a three-level 64-point network when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clouds in the checked loss.
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
}

/// A failed run: message for standard error and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn argument(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<gsnet::Error> for Failure {
    fn from(e: gsnet::Error) -> Self {
        use gsnet::Error as E;
        let code = match &e {
            E::InvalidArgument(_) => 2,
            E::Divergence { .. } | E::ContractViolation(_) => 4,
            E::Shape { .. } | E::Parse { .. } | E::InvalidData(_) | E::Io { .. } | E::Parameter { .. } | E::Json(_) => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::argument("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::argument(e.to_string()))?;
    }
    let pretty = cli.pretty;
    match &cli.command {
        Command::Descriptors(a) => commands::descriptors(a),
        Command::Knn(a) => commands::knn(a),
        Command::Fps(a) => commands::fps(a, pretty),
        Command::Train(a) => commands::train(a, pretty),
        Command::Eval(a) => commands::eval(a, pretty),
        Command::Robustness(a) => commands::robustness(a, pretty),
        Command::Synth(a) => commands::synth(a, pretty),
        Command::Gradcheck(a) => commands::gradcheck(a, pretty),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gsnet: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
