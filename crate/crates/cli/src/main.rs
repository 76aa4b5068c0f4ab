use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};

use fracobs_cli::config::{self, RunConfig};
use fracobs_cli::runner::{self, RunOptions, Subcommand};

/// Solver and verifier for supercritical nonlocal parabolic obstacle problems.
#[derive(Parser)]
#[command(name = "fracobs", version, about)]
struct Cli {
    /// Path to a JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also run (or expect) the halved-spacing companion for refinement checks.
    #[arg(long, global = true)]
    refine: bool,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Time-step the obstacle problem and write snapshot CSVs.
    Solve,
    /// Check the regularity claims on a solved trajectory; writes report JSON.
    Verify,
    /// Extract the free boundary; writes the curve CSV and expansion JSONs.
    Fb,
    /// Heat-kernel golden tests, envelope fits, tail and barrier checks.
    KernelCheck,
    /// Penalization refinement study against the projected reference.
    EpsilonStudy,
    /// Merge existing verdicts into a human-readable summary.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match config::load_config(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    let sub = match cli.command {
        Command::Solve => Subcommand::Solve,
        Command::Verify => Subcommand::Verify,
        Command::Fb => Subcommand::Fb,
        Command::KernelCheck => Subcommand::KernelCheck,
        Command::EpsilonStudy => Subcommand::EpsilonStudy,
        Command::Report => Subcommand::Report,
    };
    let opts = RunOptions {
        config,
        out: cli.out,
        refine: cli.refine,
        quiet: cli.quiet,
    };
    match runner::run(sub, &opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
