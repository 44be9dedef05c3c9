use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdelab::experiment::{run_experiment, validate_config, ExperimentKind, RunOptions, Severity};

#[derive(Parser)]
#[command(name = "sdelab", version, about = "Run SGD/SDE approximation experiments from JSON configs")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides "output" in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; overrides "seed" in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace the outputs of a previous run in the same directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<16} {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match validate_config(&config) {
            Ok(diags) => {
                for d in &diags {
                    eprintln!("{d}");
                }
                if diags.iter().any(|d| d.severity == Severity::Error) {
                    ExitCode::from(1)
                } else {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config, out, seed, overwrite } => {
            match run_experiment(&config, &RunOptions { out, seed, overwrite }) {
                Ok(outcome) => {
                    let v = &outcome.manifest.verdict;
                    println!("{}: {}", v.status, outcome.out_dir.display());
                    for line in &v.summary {
                        println!("  {line}");
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
