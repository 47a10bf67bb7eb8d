use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridfolio::cli::{self, Overrides};

#[derive(Parser)]
#[command(name = "gridfolio", version, about = "Efficient frontiers for renewable generation portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a config file against one dataset.
    Run {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the sampling seed from [risk].
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of frontier points from [sweep].
        #[arg(long)]
        points: Option<usize>,
        /// Cap the number of concurrent solves.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Merge the frontiers of several completed runs into one CSV.
    Compare {
        /// Run directories produced by `run`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Path of the merged CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            points,
            threads,
        } => {
            let overrides = Overrides {
                seed,
                points,
                threads,
            };
            match cli::run(&config, &out, &overrides) {
                Ok(manifest) => {
                    let failures = manifest.failures();
                    if failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("solve failed for: {}", failures.join(", "));
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Compare { dirs, out } => match cli::compare(&dirs, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
