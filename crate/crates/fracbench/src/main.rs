//! Experiment driver for the fractional-convolution operators: reproduces
//! the library's reference tables as deterministic CSV files, with wall-time
//! accounting kept in separate sidecar files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod experiments;
mod report;
mod sweep;

use config::FileConfig;

/// Errors split by exit code: 2 for configuration mistakes, 3 for numerical
/// failures inside a run.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Numerical(String),
}

impl From<fracconv::Error> for AppError {
    fn from(e: fracconv::Error) -> Self {
        match e {
            fracconv::Error::InvalidParameter(_) => AppError::Usage(e.to_string()),
            _ => AppError::Numerical(e.to_string()),
        }
    }
}

/// Flags shared by every subcommand.  Sweepable flags take comma lists and
/// `b^e1..b^e2` ranges (`--tau 2^-5..2^-9`).  Any flag may instead be given
/// in a `--config` file as a `key = value` line; flags win over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Fractional order(s); negative for derivatives of the convolution
    /// kernel, in (0, 1] for the solver problems.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Step size(s), e.g. `0.1` or `2^-5..2^-9`.
    #[arg(long)]
    pub tau: Option<String>,
    /// Local-memory window length (a positive multiple of tau).
    #[arg(long = "deltaT")]
    pub delta_t: Option<f64>,
    /// History-partition basis (or bases), e.g. `2,5,10`.
    #[arg(long = "B")]
    pub basis: Option<String>,
    /// Sum-of-exponentials accuracy target(s).
    #[arg(long)]
    pub eps: Option<String>,
    /// Quadrature-weight truncation cutoff.
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Number of starting-weight correction terms.
    #[arg(long)]
    pub m: Option<usize>,
    /// Explicit correction exponents (comma list), overriding k*alpha.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Interpolation kind: `linear` or `quadratic`.
    #[arg(long)]
    pub interp: Option<String>,
    /// Output directory for CSV reports (default: current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file with `key = value` defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(
    name = "fracbench",
    version,
    about = "Experiment runner for fractional-convolution operators and solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Max relative error of the compressed operator on u = 1 + t, per (B, eps).
    #[command(name = "kernel-error")]
    KernelError {
        #[command(flatten)]
        common: Common,
    },
    /// Error norms and convergence orders of the corrected solver over a tau sweep.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Max deviation between direct-operator and compressed-operator solutions.
    Gap {
        #[command(flatten)]
        common: Common,
    },
    /// Graded-mesh L1 baseline versus the corrected uniform-mesh solver.
    Graded {
        #[command(flatten)]
        common: Common,
        /// Mesh grading exponent(s), e.g. `1,3`.
        #[arg(long)]
        r: Option<String>,
    },
    /// Fractional Lorenz-type system trajectory with squared-norm tracking.
    Lorenz {
        #[command(flatten)]
        common: Common,
        /// Write every `stride`-th step of the trajectory (default 1).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Wall time of compressed versus direct solves over growing step counts.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Step counts to benchmark, e.g. `1e4,5e4,1e5`.
        #[arg(long)]
        steps: Option<String>,
        /// Benchmark only the compressed solver.
        #[arg(long)]
        skip_direct: bool,
    },
    /// Dump a scaled/truncated quadrature rule (with --N) or the per-level
    /// rule summary of a compressed-operator configuration.
    #[command(name = "rule-dump")]
    RuleDump {
        #[command(flatten)]
        common: Common,
        /// Quadrature order for a single-rule dump.
        #[arg(long = "N")]
        order: Option<usize>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::KernelError { common }
            | Command::Convergence { common }
            | Command::Gap { common }
            | Command::Graded { common, .. }
            | Command::Lorenz { common, .. }
            | Command::Benchmark { common, .. }
            | Command::RuleDump { common, .. } => common,
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    let file = match &cli.command.common().config {
        Some(path) => FileConfig::load(path).map_err(AppError::Usage)?,
        None => FileConfig::empty(),
    };
    match cli.command {
        Command::KernelError { common } => experiments::kernel_error(&common, &file),
        Command::Convergence { common } => experiments::convergence(&common, &file),
        Command::Gap { common } => experiments::gap(&common, &file),
        Command::Graded { common, r } => experiments::graded(&common, &file, r),
        Command::Lorenz { common, stride } => experiments::lorenz(&common, &file, stride),
        Command::Benchmark {
            common,
            steps,
            skip_direct,
        } => experiments::benchmark(&common, &file, steps, skip_direct),
        Command::RuleDump { common, order } => experiments::rule_dump(&common, &file, order),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
