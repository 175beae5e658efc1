use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use netmimo_core::exec::Execution;

mod config;
mod error;
mod run;
mod table;

use error::CliError;
use table::{emit_csv, Metadata};

/// Asymptotic and Monte Carlo analysis of clustered multi-cell ZF beamforming.
#[derive(Debug, Parser)]
#[command(name = "netmimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gains, power fractions and rates at fixed user fractions.
    Asymptotic(Args),
    /// Optimize user fractions for the configured fairness criterion.
    Optimize(Args),
    /// Finite-N simulation against the asymptotic values.
    Montecarlo(Args),
    /// Spectral efficiency over a parameter grid.
    Sweep(Args),
    /// Run the acceptance checks.
    Validate(Args),
}

impl Command {
    fn split(&self) -> (&'static str, &Args) {
        match self {
            Command::Asymptotic(a) => ("asymptotic", a),
            Command::Optimize(a) => ("optimize", a),
            Command::Montecarlo(a) => ("montecarlo", a),
            Command::Sweep(a) => ("sweep", a),
            Command::Validate(a) => ("validate", a),
        }
    }
}

#[derive(Debug, clap::Args)]
struct Args {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Master seed for all random draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 lets rayon decide.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn execution(threads: usize) -> Result<Execution, CliError> {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
        Ok(if threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        })
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(Execution::Sequential)
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let (name, args) = command.split();
    let cfg = config::load(&args.config)?;
    let exec = execution(args.threads)?;
    let outcome = match command {
        Command::Asymptotic(_) => run::asymptotic(&cfg)?,
        Command::Optimize(_) => run::optimize(&cfg, exec)?,
        Command::Montecarlo(_) => run::montecarlo(&cfg, args.seed, exec)?,
        Command::Sweep(_) => run::sweep(&cfg, exec)?,
        Command::Validate(_) => run::validate(&cfg, exec)?,
    };

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let hash = hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()));
    for t in &outcome.tables {
        let meta = Metadata {
            table: &t.name,
            subcommand: name,
            scenario: &cfg.scenario,
            config_sha256: &hash,
            seed: args.seed,
            code_version: env!("CARGO_PKG_VERSION"),
            rows: t.rows.len(),
        };
        let path = emit_csv(t, &args.out, &meta)?;
        eprintln!("wrote {}", path.display());
    }
    if outcome.failed > 0 {
        return Err(CliError::ValidationFailed { failed: outcome.failed });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netmimo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
