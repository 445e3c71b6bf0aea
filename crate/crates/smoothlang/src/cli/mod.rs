//! Command-line front end.
//!
//! Every subcommand prints one JSON document on stdout and diagnostics on
//! stderr, so invocations compose in pipelines and golden-file tests. Exit
//! codes are uniform: 0 success, 1 parse/usage trouble (bad flags, missing
//! or malformed files), 2 runtime/domain failures (interpreter errors,
//! invalid op inputs, gradient checks out of tolerance).

mod checks;
mod ifs;
mod json;
mod ops;
mod program;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::interp::{Grade, InterpError};

pub(crate) use json::{num, num_array, print_json};

#[derive(Parser)]
#[command(
    name = "smoothlang",
    version,
    about = "Differentiable interpretation of WHILE-programs and smooth algorithmic layers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and echo its canonical form.
    Parse {
        /// Path to a .while program.
        program: PathBuf,
    },
    /// Execute a program under the discrete or a smoothed semantics.
    Run(RunArgs),
    /// Compare analytic gradients against central differences.
    Gradcheck(CheckArgs),
    /// Differentiable sorting network.
    Sort(SortArgs),
    /// Differentiable median.
    Median(MedianArgs),
    /// Weighted softmax over a smoothly sliced sub-list.
    Wsoftmax(WeightedArgs),
    /// Weighted softmin over a smoothly sliced sub-list.
    Wsoftmin(WeightedArgs),
    /// Adjacent finite differences.
    Fdiff(FdiffArgs),
    /// Render an iterated function system to a portable graymap.
    IfsRender(IfsRenderArgs),
    /// Fit IFS map parameters to a target image.
    IfsFit(IfsFitArgs),
    /// Sample a pre-committed map choice sequence.
    IfsSample(IfsSampleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum ModeArg {
    Discrete,
    C0,
    Cinf,
}

impl ModeArg {
    pub(crate) fn grade(self) -> Grade {
        match self {
            ModeArg::Discrete => Grade::Discrete,
            ModeArg::C0 => Grade::C0,
            ModeArg::Cinf => Grade::CInf,
        }
    }
}

#[derive(Args)]
pub(crate) struct RunArgs {
    /// Path to a .while program.
    pub program: PathBuf,
    #[arg(long, value_enum, default_value = "cinf")]
    pub mode: ModeArg,
    /// Input binding, e.g. -i x1=3 (repeatable).
    #[arg(short = 'i', long = "input", value_name = "xN=VALUE")]
    pub inputs: Vec<String>,
    /// Sigmoid steepness (smooth modes).
    #[arg(long)]
    pub steepness: Option<f64>,
    /// Loop exit threshold on the execution probability (smooth modes).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Per-loop iteration cap.
    #[arg(long = "max-iters")]
    pub max_iters: Option<u64>,
    /// Also report d x0 / d input for every bound input.
    #[arg(long)]
    pub grad: bool,
    /// Include the full final environment in the output.
    #[arg(long = "dump-env")]
    pub dump_env: bool,
}

#[derive(Args)]
pub(crate) struct CheckArgs {
    /// Op name (phi0, phiinf, softsort, wsoftmax, wsoftmin, median-precise,
    /// median-fast, fdiff, rasterize, ifs-loss) or a .while program path.
    pub target: String,
    /// Vector length for vector-valued targets.
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed for the random interior evaluation point.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Explicit point: comma-separated values, or xN=V bindings for
    /// programs.
    #[arg(long)]
    pub point: Option<String>,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Maximum tolerated relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Steepness for targets that take one.
    #[arg(long)]
    pub s: Option<f64>,
    /// Recursion depth for median-fast.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Interpretation mode for program targets.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Loop exit threshold for program targets (default 1e-11).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Per-loop iteration cap for program targets. Defaults to 100: each
    /// probe replays the whole run, and truncated nested loops cost the
    /// product of their caps.
    #[arg(long = "max-iters")]
    pub max_iters: Option<u64>,
}

#[derive(Args)]
pub(crate) struct SortArgs {
    /// Input vector as JSON, e.g. '[3,1,2]'.
    pub vector: String,
    /// Exchange steepness.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Number of exchange stages (default: one per element).
    #[arg(long)]
    pub stages: Option<usize>,
    /// Sort descending instead of ascending.
    #[arg(long)]
    pub descending: bool,
    /// Companion vector (JSON) permuted alongside the keys.
    #[arg(long)]
    pub companion: Option<String>,
    /// Include the doubly stochastic relaxation matrix.
    #[arg(long)]
    pub matrix: bool,
}

#[derive(Args)]
pub(crate) struct MedianArgs {
    /// Input vector as JSON.
    pub vector: String,
    /// Use the recursive extreme-removal variant.
    #[arg(long)]
    pub fast: bool,
    /// Extreme-removal depth for --fast.
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Steepness.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
}

#[derive(Args)]
pub(crate) struct WeightedArgs {
    /// Input vector as JSON.
    pub vector: String,
    /// Inclusion weights in (0, 1] as JSON; defaults to all ones.
    #[arg(long)]
    pub w: Option<String>,
}

#[derive(Args)]
pub(crate) struct FdiffArgs {
    /// Input vector as JSON.
    pub vector: String,
    /// Shift the output mean to zero.
    #[arg(long)]
    pub normalize: bool,
    /// Append a zero so the output length matches the input.
    #[arg(long)]
    pub pad: bool,
}

#[derive(Args)]
pub(crate) struct IfsRenderArgs {
    /// Model JSON path.
    #[arg(long)]
    pub model: PathBuf,
    /// Output portable graymap path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub(crate) struct IfsFitArgs {
    /// Initial model JSON path.
    #[arg(long)]
    pub model: PathBuf,
    /// Target image (plain P2 graymap) path.
    #[arg(long)]
    pub target: PathBuf,
    /// Fitted model JSON output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV output path.
    #[arg(long = "loss-csv")]
    pub loss_csv: Option<PathBuf>,
    /// Sigma annealing schedule, comma-separated, coarse to fine.
    #[arg(long, default_value = "4,2,1")]
    pub schedule: String,
    /// Optimizer steps per sigma level.
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
}

#[derive(Args)]
pub(crate) struct IfsSampleArgs {
    /// Number of maps.
    #[arg(long)]
    pub n: usize,
    /// Sequence length.
    #[arg(long)]
    pub t: usize,
    /// RNG seed.
    #[arg(long)]
    pub seed: u64,
    /// Per-map probabilities as JSON; uniform when omitted.
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug)]
pub(crate) enum CliError {
    /// Bad flags, unreadable or unparsable files: exit 1.
    Usage(String),
    /// Domain or runtime failures: exit 2.
    Runtime(String),
}

pub(crate) fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

pub(crate) fn runtime(error: impl std::fmt::Display) -> CliError {
    CliError::Runtime(error.to_string())
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let code = match error.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = error.print();
            return code;
        }
    };
    let env_cap = match max_iters_from_env() {
        Ok(cap) => cap,
        Err(message) => {
            eprintln!("error: {message}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Parse { program } => program::cmd_parse(&program),
        Command::Run(args) => program::cmd_run(&args, env_cap),
        Command::Gradcheck(args) => checks::cmd_gradcheck(&args, env_cap),
        Command::Sort(args) => ops::cmd_sort(&args),
        Command::Median(args) => ops::cmd_median(&args),
        Command::Wsoftmax(args) => ops::cmd_weighted(&args, false),
        Command::Wsoftmin(args) => ops::cmd_weighted(&args, true),
        Command::Fdiff(args) => ops::cmd_fdiff(&args),
        Command::IfsRender(args) => ifs::cmd_render(&args),
        Command::IfsFit(args) => ifs::cmd_fit(&args),
        Command::IfsSample(args) => ifs::cmd_sample(&args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            1
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            2
        }
    }
}

/// `SMOOTHLANG_MAX_ITERS` overrides the default per-loop iteration cap;
/// explicit --max-iters flags still win.
fn max_iters_from_env() -> Result<Option<u64>, String> {
    match std::env::var("SMOOTHLANG_MAX_ITERS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err("SMOOTHLANG_MAX_ITERS is not valid UTF-8".into())
        }
        Ok(text) => match text.parse::<u64>() {
            Ok(cap) if cap >= 1 => Ok(Some(cap)),
            _ => Err(format!(
                "SMOOTHLANG_MAX_ITERS must be a positive integer, got {text:?}"
            )),
        },
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|error| usage(format!("cannot read {}: {error}", path.display())))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|error| usage(format!("cannot write {}: {error}", path.display())))
}

pub(crate) fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    serde_json::from_str(text)
        .map_err(|error| usage(format!("{what} is not a JSON array of numbers: {error}")))
}

/// Interpreter errors caused by caller-supplied configuration are usage
/// errors; genuine execution failures are runtime errors.
pub(crate) fn interp_error(error: InterpError) -> CliError {
    match error {
        InterpError::InvalidConfig(_)
        | InterpError::NonFiniteInput { .. }
        | InterpError::DuplicateInput(_) => usage(error.to_string()),
        InterpError::Discrete(_) | InterpError::Autodiff(_) => runtime(error),
    }
}
