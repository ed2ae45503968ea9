mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

/// Coherent-product decoherence experiments: free decay, stationary Γ⁰,
/// bang-bang traces and sweeps, decoherence-free reports, Fock oracle.
#[derive(Parser)]
#[command(name = "coherent-dfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherence trace of a freely evolving single qubit (CSV).
    FreeDecay(Common),
    /// Stationary dissipative factor of a label pair, with closed form where known (JSON).
    Gamma0(Common),
    /// η(τ) traces under standard and symmetrized pulse trains (CSV).
    Bangbang(Common),
    /// Read-out η versus pulse frequency at fixed total time (CSV).
    Sweep(Common),
    /// Decoherence-free conditions for a set of register branches (JSON).
    DfsReport(Common),
    /// Truncated-Fock η against the analytic value for a few discrete modes (JSON).
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// INI-style configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match out {
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // reader went away (e.g. piped into `head`)
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(io),
        },
        Some(path) => {
            // write beside the target, then move into place
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            std::fs::write(&tmp, text).map_err(io)?;
            std::fs::rename(&tmp, path).map_err(io)
        }
    }
}

type Handler = fn(&Config) -> Result<String, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, Handler) = match &cli.command {
        Command::FreeDecay(c) => (c, commands::free_decay),
        Command::Gamma0(c) => (c, commands::gamma0),
        Command::Bangbang(c) => (c, commands::bangbang),
        Command::Sweep(c) => (c, commands::sweep),
        Command::DfsReport(c) => (c, commands::dfs_report),
        Command::Oracle(c) => (c, commands::oracle),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = Config::load(&common.config)?;
    let text = f(&cfg)?;
    write_output(common.out.as_deref(), &text)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
