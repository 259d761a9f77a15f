//! `photosub`: theory tables, virtual experiments and shot-file analysis.
//!
//! Exit status: 0 success, 2 usage, 3 domain or conditioning error, 4 I/O.

mod experiment;
mod output;
mod theory;
mod values;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photosub::Error;

use output::Format;
use values::{CountRange, Interval, NumList};

/// Environment variable naming the default output directory of `simulate`.
pub const OUT_DIR_ENV: &str = "PHOTOSUB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "photosub", version, about = "Photon subtraction from thermal light")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic tables.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Run a virtual experiment and write its shot file and summary.
    Simulate(SimulateArgs),
    /// Condition a stored shot file and compare with theory.
    Analyze(AnalyzeArgs),
    /// Recover a detector gain from the voltages in a shot file.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Subcommand)]
enum TheoryCommand {
    /// Joint detected-photon distribution p(m_T, m_R) for thermal light.
    Joint(JointArgs),
    /// Conclusive subtraction statistics versus the conditioning value.
    CpsSweep(CpsSweepArgs),
    /// Inconclusive subtraction statistics over a parameter grid.
    IpsSweep(IpsSweepArgs),
    /// Click-conditioned Wigner function on a square grid.
    Wigner(WignerArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct JointArgs {
    /// Mean detected photons in the transmitted arm.
    #[arg(long = "Mt")]
    big_mt: f64,
    /// Mean detected photons in the reflected arm.
    #[arg(long = "Mr")]
    big_mr: f64,
    #[arg(long)]
    mt_max: Option<usize>,
    #[arg(long)]
    mr_max: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct CpsSweepArgs {
    /// Transmitted-arm mean(s): `x`, `x1,x2,..` or `start:stop:count`.
    #[arg(long = "Mt")]
    big_mt: NumList,
    /// Reflected-arm mean(s), same syntax.
    #[arg(long = "Mr")]
    big_mr: NumList,
    /// Conditioning values, `a..b` inclusive.
    #[arg(long = "mr", default_value = "0..6")]
    m_r: CountRange,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct IpsSweepArgs {
    /// Thermal mean photon number(s).
    #[arg(long)]
    nth: NumList,
    #[arg(long, default_value = "0.5")]
    tau: NumList,
    /// Efficiency of both detectors.
    #[arg(long, conflicts_with_all = ["eta_r", "eta_t"])]
    eta: Option<NumList>,
    #[arg(long)]
    eta_r: Option<NumList>,
    #[arg(long)]
    eta_t: Option<NumList>,
    /// Largest transmitted count kept; chosen from the tail when omitted.
    #[arg(long)]
    mt_max: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct WignerArgs {
    #[arg(long)]
    nth: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, alias = "eta")]
    eta_r: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = photosub::ips::WIGNER_DEFAULT_POINTS)]
    points: usize,
    /// Half-width of each axis; six standard deviations when omitted.
    #[arg(long)]
    extent: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ShotFormatArg {
    Jsonl,
    Binary,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// Experiment configuration as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nth: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta_t: Option<f64>,
    #[arg(long)]
    eta_r: Option<f64>,
    #[arg(long)]
    gamma_t: Option<f64>,
    #[arg(long)]
    gamma_r: Option<f64>,
    #[arg(long)]
    noise_t: Option<f64>,
    #[arg(long)]
    noise_r: Option<f64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ShotFormatArg::Jsonl)]
    shot_format: ShotFormatArg,
    /// Shot file path; defaults to `shots-<seed>.<ext>` in $PHOTOSUB_OUT_DIR or `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary path; defaults to `summary-<seed>.json` next to the default shot file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum AnalyzeMode {
    All,
    Unconditional,
    Cps,
    Ips,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = AnalyzeMode::All)]
    mode: AnalyzeMode,
    /// Conditioning value for `--mode cps`.
    #[arg(long = "mr", default_value_t = 2)]
    m_r: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Arm {
    T,
    R,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Arm::T)]
    arm: Arm,
    /// Search interval for the gain in volts, `lo..hi`.
    #[arg(long, default_value = "0.05..0.2")]
    range: Interval,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(Error::Io { .. } | Error::Stream(_) | Error::Parse { .. } | Error::Csv(_) | Error::Json(_)) => 4,
            Failure::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Theory(TheoryCommand::Joint(a)) => theory::joint(a),
        Command::Theory(TheoryCommand::CpsSweep(a)) => theory::cps_sweep(a),
        Command::Theory(TheoryCommand::IpsSweep(a)) => theory::ips_sweep(a),
        Command::Theory(TheoryCommand::Wigner(a)) => theory::wigner(a),
        Command::Simulate(a) => experiment::simulate(a),
        Command::Analyze(a) => experiment::analyze(a),
        Command::Calibrate(a) => experiment::calibrate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("photosub: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
