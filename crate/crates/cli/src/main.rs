// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lvgrape_cli::check::Fault;
use lvgrape_cli::commands::{cmd_benchmark, cmd_check, cmd_optimize};
use lvgrape_cli::{CliError, CliResult};

/// Newton-Raphson GRAPE for offset ensembles of two-level systems.
///
/// Exit status: 0 success, 2 config error, 3 check failure, 4 runtime or
/// I/O error.
#[derive(Debug, Parser)]
#[command(name = "lvgrape", version)]
struct Cli {
    /// Worker threads for objective evaluation (default: all cores).
    #[arg(long, global = true, env = "LVGRAPE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a pulse and write pulse, trace and summary files.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides `problem.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a timing plan and write benchmark.csv.
    Benchmark {
        /// Plan file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the oracle suite on the configured problem.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

// println! panics on a closed pipe
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Optimize { config, out, seed } => {
            let a = cmd_optimize(&config, &out, seed)?;
            say!(
                "{}: fidelity {:.12} after {} iterations",
                a.outcome.stop,
                a.outcome.fidelity,
                a.outcome.trace.len()
            );
            say!(
                "wrote {}, {}, {}",
                a.pulse.display(),
                a.trace.display(),
                a.summary.display()
            );
        }
        Command::Benchmark { config, out } => {
            let (path, _) = cmd_benchmark(&config, &out, |m| {
                eprintln!(
                    "n={:<6} dt={:.4e} {:<20} {:<9} median {:.4e} s",
                    m.point.n,
                    m.point.dt,
                    m.quantity,
                    m.method,
                    m.median()
                );
            })?;
            say!("wrote {}", path.display());
        }
        Command::Check {
            config,
            seed,
            inject_fault,
        } => {
            cmd_check(&config, seed, inject_fault, |r| {
                for c in &r.checks {
                    say!("{c}");
                }
            })?;
            say!("all checks passed");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lvgrape: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
