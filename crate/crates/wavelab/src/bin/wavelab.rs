//! Command-line front end: parse arguments, run, print the manifest path.
//!
//! Standard output carries only the manifest path; everything else goes to
//! standard error, and any failure exits nonzero with the error chain.

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use wavelab::cli::{self, RunMode};

#[derive(Parser)]
#[command(
    name = "wavelab",
    version,
    about = "Spectral laboratory for randomized semilinear waves on the torus"
)]
struct Args {
    /// What to run; overrides the `mode` field of the config file.
    #[arg(value_enum)]
    mode: RunMode,

    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Dotted-path leaf overrides, e.g. `--set solver.dt=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Random seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread cap; overrides the config file.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match cli::load_config(&args.config, &args.set, Some(args.mode), args.seed, args.threads) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("wavelab: invalid configuration: {err}");
            return ExitCode::FAILURE;
        }
    };
    match cli::run(&config) {
        Ok(manifest_path) => {
            println!("{}", manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("wavelab: {err}");
            ExitCode::FAILURE
        }
    }
}
