use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench;
mod oracle;
mod run;
mod summary;

#[derive(Parser)]
#[command(version, about = "Surrogate-assisted multiobjective cell search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search and write its log, checkpoints, front and summary
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Stop after this many generations, leaving a checkpoint to resume
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Enumerate the (restricted) space and write the exact front
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare variants over several seeds
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of samea,mea,random
        #[arg(long, default_value = "samea,mea,random")]
        variants: String,
        /// Inclusive range `a..b` or comma-separated list
        #[arg(long, default_value = "0..4")]
        seeds: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Continue an interrupted run from its checkpoint
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

/// Failure classes mapped to exit codes.
pub enum Failure {
    /// Bad arguments or configuration (exit 1).
    Usage(anyhow::Error),
    /// Anything that went wrong after the inputs were accepted (exit 2).
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            stop_after,
        } => run::cmd_run(&config, seed, &out, stop_after),
        Command::Oracle { config, out } => oracle::cmd_oracle(&config, &out),
        Command::Bench {
            config,
            variants,
            seeds,
            out,
        } => bench::cmd_bench(&config, &variants, &seeds, &out),
        Command::Resume { checkpoint } => run::cmd_resume(&checkpoint),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
