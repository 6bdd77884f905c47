//! `spdmd`: decomposition, sparse mode selection, sweeps and synthetic fixtures
//! from the command line.
//!
//! Exit codes: 0 success, 2 input or format error, 3 numerical error,
//! 4 solver did not converge (results are still written).

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spdmd_core::dmd::{ModeKind, RankPolicy};
use spdmd_core::Error;

#[derive(Parser, Debug)]
#[command(name = "spdmd", version, about = "Dynamic mode decomposition with sparsity-promoting mode selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full-rank decomposition: eigenvalues, amplitudes, modes and mode table.
    Decompose(DecomposeArgs),
    /// Sparse amplitude selection at a single weight.
    Spdmd(SpdmdArgs),
    /// Sparse selection over a log-spaced grid of weights.
    Sweep(SweepArgs),
    /// Generate snapshots from a fixture spec.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Snapshot file (SNPB or CSV, detected from content).
    #[arg(long, conflicts_with_all = ["input_vy", "input_vz"])]
    pub input: Option<PathBuf>,
    /// Horizontal velocity component.
    #[arg(long, requires = "input_vz")]
    pub input_vy: Option<PathBuf>,
    /// Vertical velocity component.
    #[arg(long, requires = "input_vy")]
    pub input_vz: Option<PathBuf>,
    /// Observable derived at ingestion.
    #[arg(long, value_enum, default_value_t = Observable::Raw)]
    pub observable: Observable,
    /// `auto` (numerical rank) or a maximum mode count.
    #[arg(long, default_value = "auto", value_parser = parse_rank)]
    pub rank: RankPolicy,
    #[arg(long, value_enum, default_value_t = KindArg::Projected)]
    pub mode_kind: KindArg,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Args, Debug, Clone)]
pub struct AdmmArgs {
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub eps_primal: f64,
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub eps_dual: f64,
    #[arg(long, default_value_t = 10_000)]
    pub kmax: usize,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args, Debug)]
struct SpdmdArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Sparsity weight.
    #[arg(long, value_parser = nonnegative)]
    gamma: f64,
    #[command(flatten)]
    admm: AdmmArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Smallest weight; defaults to 1e-6 of the weight that zeroes every amplitude.
    #[arg(long, value_parser = positive)]
    gamma_min: Option<f64>,
    /// Largest weight; defaults to the weight that zeroes every amplitude.
    #[arg(long, value_parser = positive)]
    gamma_max: Option<f64>,
    /// Number of grid points.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    grid: u64,
    #[command(flatten)]
    admm: AdmmArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Fixture spec JSON.
    #[arg(long)]
    input: PathBuf,
    /// Number of snapshots to generate.
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Overrides the spec's noise seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Observable {
    Raw,
    VelocityMagnitude,
    VorticityMagnitude,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindArg {
    Projected,
    Exact,
}

impl From<KindArg> for ModeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Projected => ModeKind::Projected,
            KindArg::Exact => ModeKind::Exact,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

fn parse_rank(s: &str) -> Result<RankPolicy, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(RankPolicy::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) => Err("rank must be positive".into()),
        Ok(r) => Ok(RankPolicy::Fixed(r)),
        Err(_) => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a nonnegative number, got '{s}'")),
    }
}

/// How a run ended when no error was raised.
pub enum Outcome {
    Done,
    NotConverged,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

/// Runs one command line (program name first) and returns the exit code.
///
/// Errors are reported on stderr as a single JSON object.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Decompose(a) => commands::decompose(&a.input),
        Command::Spdmd(a) => commands::spdmd(&a.input, a.gamma, &a.admm),
        Command::Sweep(a) => commands::sweep(&a.input, a.gamma_min, a.gamma_max, a.grid as usize, &a.admm),
        Command::Synth(a) => commands::synth(&a.input, a.steps, a.seed, &a.out),
    };
    let report = match result {
        Ok(Outcome::Done) => return 0,
        Ok(Outcome::NotConverged) => ErrorReport {
            error: "convergence",
            message: "ADMM reached the iteration limit; partial results were written".into(),
            exit_code: 4,
        },
        Err(e) => ErrorReport {
            error: e.kind(),
            message: e.to_string(),
            exit_code: exit_code(&e),
        },
    };
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
    report.exit_code
}
