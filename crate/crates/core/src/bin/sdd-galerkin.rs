use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdd_galerkin::runner::{load_config, run, RunOptions};

#[derive(Parser)]
#[command(
    version,
    about = "Spectral-Galerkin experiments for reaction-diffusion with state-dependent delay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output`, then `out/`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent runs for sweeps.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Add one column per modal coefficient to trajectory CSVs.
        #[arg(long)]
        dump_modes: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        jobs,
        dump_modes,
    } = cli.command;
    let cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let opts = RunOptions {
        out: out
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        jobs,
        dump_modes,
    };
    match run(&cfg, &opts) {
        Ok(outcome) => {
            for e in &outcome.entries {
                println!("{} {}", e.verdict, e.check_id);
            }
            for m in &outcome.messages {
                println!("{m}");
            }
            for b in &outcome.blowups {
                eprintln!("blowup suspected in {} at t = {}: {}", b.run, b.t, b.reason);
            }
            println!("artifacts in {}", opts.out.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
