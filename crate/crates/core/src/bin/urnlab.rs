use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use urnlab::experiment::{self, ExitStatus, OutputFormat, RunOptions};

#[derive(Parser)]
#[command(
    name = "urnlab",
    version,
    about = "Multi-drawing Pólya urn experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble, run the enabled tests and write artifacts.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// `key=value`, dotted keys reach into tables. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the closed-form prediction as JSON.
    Predict {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                ExitStatus::ConfigError.code()
            } else {
                0
            };
            return ExitCode::from(code as u8);
        }
    };
    let status = match cli.command {
        Command::Run {
            config,
            seed,
            replicates,
            threads,
            out,
            format,
            overrides,
        } => {
            let opts = RunOptions {
                overrides,
                seed,
                replicates,
                threads,
                out,
                format,
            };
            match experiment::run(&config, &opts) {
                Ok(result) => {
                    print!("{}", experiment::render_report(&result.summary));
                    for f in &result.files {
                        println!("wrote {}", f.display());
                    }
                    result.status()
                }
                Err(e) => {
                    eprintln!("urnlab: {e}");
                    e.status()
                }
            }
        }
        Command::Predict { config, overrides } => match experiment::predict(&config, &overrides) {
            Ok(json) => {
                println!("{json}");
                ExitStatus::Pass
            }
            Err(e) => {
                eprintln!("urnlab: {e}");
                e.status()
            }
        },
    };
    ExitCode::from(status.code() as u8)
}
