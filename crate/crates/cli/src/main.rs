//! `netdiag`: extract signatures from trace pairs, train the two-stage
//! classifier, diagnose pairs, evaluate labeled sets and simulate traces.
//!
//! Machine-readable output goes to stdout as JSON; human summaries go to
//! stderr. Exit codes: 0 success or healthy verdict, 2 usage/config/parse
//! errors, 3 training failure, 4 catalog mismatch, 10 faulty link, 20 client
//! fault found.

mod config;
mod diagnose;
mod eval;
mod exit;
mod extract;
mod files;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::CliConfig;
use exit::{OrExit, Outcome};

#[derive(Debug, Parser)]
#[command(name = "netdiag", version, about = "Diagnose TCP link and client faults from packet traces")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, env = "NETDIAG_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for folds and simulations; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress human-readable summaries on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Lpd,
    Cfd,
}

impl StageArg {
    pub fn kind(self) -> netdiag::preprocess::LabelKind {
        match self {
            StageArg::Lpd => netdiag::preprocess::LabelKind::Link,
            StageArg::Cfd => netdiag::preprocess::LabelKind::Client,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a signature database from labeled trace pairs.
    Extract(extract::Args),
    /// Train the link classifier or the client-fault network.
    Train(train::Args),
    /// Diagnose one trace pair.
    Diagnose(diagnose::Args),
    /// Diagnose a labeled set and write accuracy reports.
    Eval(eval::Args),
    /// Simulate trace pairs from a preset or a scenario file.
    Synth(synth::Args),
}

/// Settings every subcommand sees.
pub struct Ctx {
    pub config: CliConfig,
    pub seed: u64,
    pub quiet: bool,
}

impl Ctx {
    /// Human-readable line on stderr, unless quiet.
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Prints `value` as one JSON line on stdout.
pub fn emit<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("output types serialize"));
}

fn run(cli: Cli) -> Outcome {
    let config = CliConfig::load(cli.config.as_deref()).or_exit(exit::USAGE)?;
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(config.seed),
        config,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Extract(a) => extract::run(&ctx, a),
        Command::Train(a) => train::run(&ctx, a),
        Command::Diagnose(a) => diagnose::run(&ctx, a),
        Command::Eval(a) => eval::run(&ctx, a),
        Command::Synth(a) => synth::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
