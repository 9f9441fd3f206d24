//! `notp`: key generation, analysis, simulation, networked key expansion,
//! attack experiments and one-time-pad utilities.

mod analyze;
mod attack;
mod config;
mod exit;
mod files;
mod keygen;
mod network;
mod pad;
mod simulate;

use std::process::ExitCode;

use anyhow::Result;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{CommonArgs, Config};

#[derive(Parser, Debug)]
#[command(name = "notp", version, about = "Noise-protected one-time-pad key expansion")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// Do not echo the effective configuration
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a genesis key file
    Keygen(keygen::KeygenArgs),
    /// Leakage and length-budget analysis at one point or over a grid
    Analyze(analyze::AnalyzeArgs),
    /// Run both parties in one process over an in-memory channel
    Simulate(simulate::SimulateArgs),
    /// Accept sessions from peers
    Serve(network::ServeArgs),
    /// Run a session against a listening peer
    Connect(network::ConnectArgs),
    /// Run an attack experiment and write a CSV report
    Attack(attack::AttackArgs),
    /// One-time-pad encrypt a file with unspent key bits
    Encrypt(pad::PadArgs),
    /// One-time-pad decrypt a file with the mirrored key
    Decrypt(pad::PadArgs),
    /// Compute a 32-byte message tag
    Tag(pad::PadArgs),
    /// Check a message tag
    Verify(pad::VerifyArgs),
}

fn run(cli: Cli, matches: &clap::ArgMatches) -> Result<()> {
    let config = Config::resolve(&cli.common, matches)?;
    if !cli.quiet {
        eprint!("{}", config.describe());
    }
    match cli.command {
        Command::Keygen(args) => keygen::run(&config, &args),
        Command::Analyze(args) => analyze::run(&config, &args),
        Command::Simulate(args) => simulate::run(&config, &args),
        Command::Serve(args) => network::serve(&config, &args),
        Command::Connect(args) => network::connect(&config, &args),
        Command::Attack(args) => attack::run(&config, &args),
        Command::Encrypt(args) => pad::encrypt(&config, &args),
        Command::Decrypt(args) => pad::decrypt(&config, &args),
        Command::Tag(args) => pad::tag(&config, &args),
        Command::Verify(args) => pad::verify(&config, &args),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli, &matches) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::code_for(&err))
        }
    }
}
