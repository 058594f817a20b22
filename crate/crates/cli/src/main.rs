//! `defbond` — defaultable-bond pricing from the command line.
//!
//! Subcommands: `price`, `zcb`, `mc`, `compare`, `surface`. Every run is
//! driven by a TOML configuration (`--config`); `--mesh` and
//! `--steps-per-year` override the numerics in place, `--sweep` expands
//! `price` into the full step-density × mesh table, and `--dump-config`
//! echoes the effective configuration and exits.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 I/O, 5 computation.
//! Errors print as a single line `error: <category>: <message>` on stderr.

mod cmds;
mod config;
mod fmt;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// One-line, machine-parsable failure: `error: <category>: <message>`.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation (unknown flag, flag/subcommand mismatch). Exit 2.
    Usage(String),
    /// The configuration doesn't parse or doesn't validate. Exit 3.
    Config(String),
    /// Reading or writing a file failed. Exit 4.
    Io(String),
    /// The engine rejected the problem or a solve failed. Exit 5.
    Compute(String),
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Compute(_) => "compute",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
            CliError::Compute(_) => 5,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = match self {
            CliError::Usage(m)
            | CliError::Config(m)
            | CliError::Io(m)
            | CliError::Compute(m) => m,
        };
        write!(f, "error: {}: {}", self.category(), msg)
    }
}

#[derive(Parser)]
#[command(
    name = "defbond",
    version,
    about = "Defaultable coupon-bond pricing: two-factor PDE engine with a Monte Carlo cross-check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the bond on the PDE engine (table + optional JSON result file)
    Price(RunArgs),
    /// Hazard-free discount curve, PDE vs the closed form, maturities 1-10y
    Zcb(RunArgs),
    /// Monte Carlo estimate of the bond value with its 95% interval
    Mc(RunArgs),
    /// One-row comparison: PDE value against the Monte Carlo interval
    Compare(RunArgs),
    /// Export the bond value over the whole (S, r) grid as CSV
    Surface(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Price(_) => "price",
            Command::Zcb(_) => "zcb",
            Command::Mc(_) => "mc",
            Command::Compare(_) => "compare",
            Command::Surface(_) => "surface",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Price(a)
            | Command::Zcb(a)
            | Command::Mc(a)
            | Command::Compare(a)
            | Command::Surface(a) => a,
        }
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Expand `price` into the 90/180/360 × Mesh 4/8/16/32 table
    #[arg(long)]
    sweep: bool,

    /// Override numerics.mesh (elements per axis)
    #[arg(long, value_name = "N")]
    mesh: Option<usize>,

    /// Override numerics.steps_per_year
    #[arg(long, value_name = "N")]
    steps_per_year: Option<u32>,

    /// Output file (price: JSON result, surface: CSV)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Echo the effective configuration as TOML and exit
    #[arg(long)]
    dump_config: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let rc = RunConfig::parse(&text)?;

    if args.dump_config {
        return cmds::dump_config(&rc, args);
    }
    if args.sweep && !matches!(cli.command, Command::Price(_)) {
        return Err(CliError::Usage(format!(
            "--sweep only applies to `price`, not `{}`",
            cli.command.name()
        )));
    }

    match &cli.command {
        Command::Price(a) => cmds::cmd_price(&rc, a),
        Command::Zcb(a) => cmds::cmd_zcb(&rc, a),
        Command::Mc(a) => cmds::cmd_mc(&rc, a),
        Command::Compare(a) => cmds::cmd_compare(&rc, a),
        Command::Surface(a) => cmds::cmd_surface(&rc, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            // Help/version are successful outcomes; clap renders them.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Compress clap's multi-line report into the one-line contract.
            let first = e
                .render()
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid invocation")
                .trim_start_matches("error: ")
                .to_owned();
            let err = CliError::Usage(first);
            eprintln!("{err}");
            return ExitCode::from(err.exit_code());
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
