//! `bqc`: batch front end for certification, synthesis and simulation.
//!
//! Exit codes: 0 success, 1 numerical or filesystem failure, 2 refuted
//! certification, 3 unconverged synthesis, 4 configuration error. Failures
//! print a single `bqc: <kind>: <message>` line on stderr.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Loaded;
use output::OutDir;

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 4;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn report(&self) {
        let (kind, msg) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Runtime(m) => ("runtime", m),
        };
        eprintln!("bqc: {kind}: {}", msg.replace('\n', " "));
    }
}

#[derive(Parser)]
#[command(
    name = "bqc",
    version,
    about = "Bilinear quantum control: certify, synthesize, simulate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the controllability hypotheses at a truncation order.
    Certify(Flags),
    /// Search a control steering one state to another.
    Synthesize(Flags),
    /// Propagate a state or density matrix under a control file.
    Simulate(Flags),
    /// Lower bound on the duration of any admissible transfer.
    Bound(Flags),
    /// Build a model and write it as a system file.
    Model(Flags),
}

#[derive(Args, Debug, Clone)]
pub struct Flags {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides any seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a whitespace-separated trajectory for gnuplot.
    #[arg(long)]
    pub plot: bool,
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("BQC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(format!(
            "BQC_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<i32, Failure> {
    init_threads()?;
    let (flags, f): (&Flags, fn(&Loaded, &Flags, &OutDir) -> Result<i32, Failure>) =
        match &cli.command {
            Command::Certify(f) => (f, commands::certify_cmd),
            Command::Synthesize(f) => (f, commands::synthesize_cmd),
            Command::Simulate(f) => (f, commands::simulate_cmd),
            Command::Bound(f) => (f, commands::bound_cmd),
            Command::Model(f) => (f, commands::model_cmd),
        };
    let cfg = Loaded::read(&flags.config)?;
    let out = OutDir::create(&flags.out)?;
    f(&cfg, flags, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            Failure::Config(first.trim_start_matches("error: ").to_string()).report();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
