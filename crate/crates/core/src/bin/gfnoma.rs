use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gfnoma::evaluation::report::{csv_string, emit_csv};
use gfnoma::evaluation::{run_single, run_sweep, ExperimentConfig, ReceiverKind};
use gfnoma::selftest::run_selftest;

/// Grant-free NOMA multi-antenna receiver simulator.
#[derive(Parser)]
#[command(name = "gfnoma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configuration at a single operating point.
    Run(RunArgs),
    /// Run the sweep described in the configuration.
    Sweep(RunArgs),
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV output path; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Receiver to evaluate; repeat for several.
    #[arg(long, value_name = "NAME")]
    receiver: Vec<ReceiverKind>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if !self.receiver.is_empty() {
            cfg.receiver.receivers = self.receiver.clone();
        }
        cfg.validate().context("invalid configuration after command-line overrides")?;
        Ok(cfg)
    }
}

fn write_rows(rows: &[gfnoma::evaluation::ResultRow], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => emit_csv(rows, path)?,
        None => std::io::stdout().write_all(csv_string(rows).as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let rows = run_single(&args.config()?)?;
            write_rows(&rows, args.out.as_ref())?;
            Ok(true)
        }
        Command::Sweep(args) => {
            let rows = run_sweep(&args.config()?)?;
            write_rows(&rows, args.out.as_ref())?;
            Ok(true)
        }
        Command::Selftest { seed, threads } => {
            if let Some(t) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
            }
            Ok(run_selftest(&mut std::io::stdout(), seed)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
