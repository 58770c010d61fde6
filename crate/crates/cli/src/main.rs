//! `perish`: order decisions, simulation studies, FIFO checks and exact DP
//! benchmarks for fixed-lifetime perishable inventory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "perish", version, about = "Ordering policies for fixed-lifetime perishable inventory")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Order quantity for one state.
    Decide(DecideArgs),
    /// Evaluate the configured policies on common random scenarios.
    Simulate(SimulateArgs),
    /// Check the conditions under which FIFO issuing is optimal.
    CheckFifo(CheckFifoArgs),
    /// Solve the exact dynamic program.
    SolveDp(SolveDpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecidePolicy {
    #[value(name = "B")]
    B,
    #[value(name = "TB")]
    TB,
    /// Myopic lower bound.
    #[value(name = "L")]
    L,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// Period, starting at 1.
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// On-hand units by age, youngest first (K-1 comma-separated values).
    #[arg(long)]
    state: String,
    /// Demands of periods 1..t-1; zeros when omitted.
    #[arg(long)]
    realized: Option<String>,
    /// Known forecast signals for periods 1..t+W-1.
    #[arg(long)]
    signals: Option<String>,
    #[arg(long, value_enum, default_value_t = DecidePolicy::TB)]
    policy: DecidePolicy,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scenarios: Option<usize>,
    /// Comma-separated subset of B, TB, OPT, OPT_wof.
    #[arg(long)]
    policies: Option<String>,
    /// Write results.csv and results.json here instead of printing CSV.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Build DP benchmarks beyond the table-size limit.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
pub struct CheckFifoArgs {
    /// Override the configured discount factor.
    #[arg(long)]
    beta: Option<f64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
pub struct SolveDpArgs {
    /// Ignore forecast signals.
    #[arg(long)]
    wof: bool,
    /// Write the value table as CSV.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Solve even when the table exceeds the size limit.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] perishable::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use perishable::Error as E;
        match self {
            Self::Core(E::Resource(_)) => 3,
            Self::Core(E::Consistency(_) | E::SearchBound(_)) => 4,
            Self::Core(_) | Self::Config { .. } | Self::Usage(_) => 2,
            Self::Io { .. } => 1,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let path = cli.config.ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let config = config::Config::load(&path)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Decide(args) => commands::decide(&config, &args, &mut out),
        Command::Simulate(args) => commands::simulate(&config, &args, &mut out),
        Command::CheckFifo(args) => commands::check_fifo(&config, &args, &mut out),
        Command::SolveDp(args) => commands::solve_dp(&config, &args, &mut out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perish: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
