use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::Format;

/// Tests for constant intraday volatility in high-frequency prices.
#[derive(Debug, Parser)]
#[command(name = "hvtest", version, about)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one sample path and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a heteroscedasticity test on a path CSV.
    Test(TestArgs),
    /// Monte Carlo size/power table.
    Mc(McArgs),
    /// QQ pairs and histogram from Monte Carlo statistics.
    Qq(QqArgs),
    /// Clean raw ticks and write calendar-sampled log-prices per day.
    Clean(CleanArgs),
    /// Per-day tests, rejection proportions and the spot-variance curve.
    Report(ReportArgs),
    /// Print build metadata.
    Version,
}

#[derive(Debug, Args, Default)]
pub struct TuningArgs {
    /// Spot-window constant: k_n = floor(theta * sqrt(n)).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Truncation exponent.
    #[arg(long)]
    pub varpi: Option<f64>,
    /// Truncation threshold multiplier.
    #[arg(long)]
    pub trunc_mult: Option<f64>,
    /// Pre-averaging constant c in p_n = floor(c n^(1/2+chi)).
    #[arg(long)]
    pub c_pre: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    /// Kernel constant a in l_n = floor(a n^b).
    #[arg(long)]
    pub a_ker: Option<f64>,
    #[arg(long)]
    pub b_ker: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Base model: constant or heston (reference parameters).
    #[arg(long, value_parser = ["constant", "heston"])]
    pub model: Option<String>,
    /// Volatility of the constant model.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Initial log-price.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Number of increments.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Jump intensity per day.
    #[arg(long)]
    pub jumps: Option<f64>,
    /// Jump size standard deviation.
    #[arg(long)]
    pub jump_sigma: Option<f64>,
    /// Noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Path CSV with columns index,time,obs.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// plain, truncated or preaveraged (alias preavg).
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated grid sizes.
    #[arg(long)]
    pub n: Option<String>,
    /// Comma-separated jump intensities.
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long)]
    pub sigma_jump: Option<f64>,
    /// Comma-separated noise levels.
    #[arg(long)]
    pub etas: Option<String>,
    /// Comma-separated significance levels.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Force one variant for every scenario.
    #[arg(long)]
    pub variant: Option<String>,
    /// Size only; skip the alternative model.
    #[arg(long)]
    pub no_power: bool,
    /// Directory for the rates CSV, table CSV and JSON report.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stdout rendering.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct QqArgs {
    /// MC report JSON, or a JSON array of statistics.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<u64>,
    /// Writes <prefix>_qq.csv and <prefix>_hist.csv.
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Tick CSV with header date,time,price,size.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub grid_seconds: Option<u32>,
    /// Session window, e.g. 09:30-16:00.
    #[arg(long)]
    pub session: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Variant grids, e.g. plain:300,truncated:300,preaveraged:5.
    #[arg(long)]
    pub variants: Option<String>,
    /// Comma-separated spans, e.g. 09:30-16:00,10:00-15:30.
    #[arg(long)]
    pub spans: Option<String>,
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub session: Option<String>,
    /// Minimum increments as a multiple of k_n.
    #[arg(long)]
    pub min_increment_factor: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const DEGENERATE: u8 = 4;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: Self::IO,
            message: message.into(),
        }
    }
}

impl From<hvtest_core::Error> for CliError {
    fn from(e: hvtest_core::Error) -> Self {
        use hvtest_core::Error as E;
        let code = match &e {
            E::Parameter(_) | E::Configuration(_) | E::Index { .. } => Self::CONFIG,
            E::Io(_) | E::Input(_) | E::Csv(_) | E::Json(_) => Self::IO,
            E::Data(_) | E::Degenerate(_) => Self::DEGENERATE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(cfg.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(&cfg, a),
        Command::Test(a) => commands::test(&cfg, a),
        Command::Mc(a) => commands::mc(&cfg, a),
        Command::Qq(a) => commands::qq(&cfg, a),
        Command::Clean(a) => commands::clean(&cfg, a),
        Command::Report(a) => commands::report(&cfg, a),
        Command::Version => {
            commands::version();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
