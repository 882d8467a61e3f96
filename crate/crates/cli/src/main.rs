//! `pbradmm` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or numerical setup failure, 2 config error,
//! 3 divergence, 4 equivalence check failure.

mod commands;
mod config;
mod error;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pbradmm", version, about = "Partition-based relaxed ADMM over lossy networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for Monte Carlo runs and sweep cells.
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a graph and problem instance.
    Generate(Common),
    /// Run the distributed solver and write error traces.
    Run(Common),
    /// Compare the distributed iterates with the stacked reference.
    Check(Common),
    /// Classify convergence over a (rho, alpha, p) grid.
    Sweep(Common),
    /// List the built-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Use this instance file instead of generating one from the config.
    #[arg(long, value_name = "PATH")]
    instance: Option<PathBuf>,
    /// Output directory; defaults to `output.dir`, then the current directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace every seed in the config (testing only).
    #[arg(long, value_name = "INT")]
    seed_override: Option<u64>,
}

impl Common {
    fn context(&self) -> Result<Context, CliError> {
        let text = match (&self.config, &self.preset) {
            (Some(path), _) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
            (None, Some(name)) => config::preset(name)?.to_string(),
            (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
        };
        let mut config = Config::parse(&text)?;
        if let Some(seed) = self.seed_override {
            config.override_seeds(seed);
        }
        let out = commands::output_dir(self.out.as_deref(), &config);
        Ok(Context { config, instance: self.instance.clone(), out })
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(c) => commands::generate(&c.context()?),
        Command::Run(c) => commands::run(&c.context()?),
        Command::Check(c) => commands::check(&c.context()?),
        Command::Sweep(c) => commands::sweep(&c.context()?),
        Command::Presets { name: None } => {
            for name in config::preset_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            print!("{}", config::preset(&name)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
