//! Command-line front end: strict JSON configs in, tables and residual
//! summaries out. Exit codes: 0 success, 1 usage or config error, 2 when a
//! configured threshold (or a demo tolerance) is exceeded.

pub mod commands;
pub mod config;
pub mod output;
pub mod registry;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::OscillatorArgs;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "gfvc",
    version,
    about = "Kernel-driven fractional operators and variational solvers"
)]
struct Cli {
    /// Seed for randomized grid sampling (subinterval draws stay reproducible).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operator evaluations
    Op {
        #[command(subcommand)]
        action: OpCommand,
    },
    /// Check an integration-by-parts pairing for the configured kernel
    IbpCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Minimize the configured functional with the direct Ritz method
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Stationarity residual along a named or solved trajectory
    Residual {
        #[arg(long)]
        config: PathBuf,
    },
    /// Invariance defect and conservation-law residual for a transformation family
    Noether {
        #[arg(long)]
        config: PathBuf,
    },
    /// Conserved-quantity values and flatness along a trajectory
    ConstantOfMotion {
        #[arg(long)]
        config: PathBuf,
    },
    /// Built-in demonstrations
    Demo {
        #[command(subcommand)]
        which: DemoCommand,
    },
    /// Structural checks of a configured problem
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum OpCommand {
    /// Apply the configured operator to a named function at given points
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Damped oscillator: solve, compare to the closed form, emit a CSV table
    Oscillator(OscillatorArgs),
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive here too; only real parse
            // failures are usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Op {
            action: OpCommand::Eval { config },
        } => load_and(config, commands::op_eval),
        Command::IbpCheck { config } => load_and(config, commands::ibp_check),
        Command::Solve { config } => load_and(config, commands::solve),
        Command::Residual { config } => load_and(config, commands::residual),
        Command::Noether { config } => {
            RunConfig::load(config).and_then(|cfg| commands::noether(&cfg, cli.seed))
        }
        Command::ConstantOfMotion { config } => load_and(config, commands::constant_of_motion),
        Command::Demo {
            which: DemoCommand::Oscillator(args),
        } => commands::demo_oscillator(args),
        Command::Validate { config } => load_and(config, commands::validate),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_and(
    path: &PathBuf,
    command: impl Fn(&RunConfig) -> gfvc::Result<i32>,
) -> gfvc::Result<i32> {
    command(&RunConfig::load(path)?)
}
