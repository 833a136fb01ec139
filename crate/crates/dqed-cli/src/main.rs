//! `dqed <command> --config run.json --out DIR [--threads N] [--cache DIR]`
//!
//! Exit codes: 0 ok, 1 configuration or input error, 2 numerical failure,
//! 3 validation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dqed::cli::{exit_code, run_file, set_threads, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Static modes and eigenvalue table.
    Modes,
    /// Coupling coefficients on the sweep grid.
    Coupling,
    /// Transfer matrix H(ω).
    Response,
    /// Impulse response h(t).
    Impulse,
    /// Mean coordinates and fields for a driving model.
    Field,
    /// Oracle battery with a pass/fail table.
    Validate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Modes => Command::Modes,
            Cmd::Coupling => Command::Coupling,
            Cmd::Response => Command::Response,
            Cmd::Impulse => Command::Impulse,
            Cmd::Field => Command::Field,
            Cmd::Validate => Command::Validate,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dqed", version, about = "Impulse-response kernels of dispersive dielectric bodies")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Cache directory for mode sets and coupling tables.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Suppress progress lines.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = set_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    }
    match run_file(args.command.into(), &args.config, &args.out, args.cache.as_deref(), !args.quiet) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", args.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
