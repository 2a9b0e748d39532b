use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use histlab::Execution;
use histlab_cli::{render, write_atomic, AppendixParams, CliResult, Overrides};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "histlab", version, about = "Decoherence functionals and consistency conditions for quantum histories")]
struct Cli {
    /// Classification threshold, overriding the document's.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Seed, overriding the document's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Directory for the report and any witness files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the checks listed in a scenario file.
    Check { scenario: PathBuf },
    /// Sample scenarios as described by a search file.
    Search {
        config: PathBuf,
        /// Run trials on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Forward and reverse Diósi tests on two scenario files.
    Compose { a: PathBuf, b: PathBuf },
    /// The two-time {C, C̄} scenario; random inputs need --seed.
    Appendix {
        /// Hilbert space dimension.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Rank of the projector P; defaults to half the dimension.
        #[arg(long)]
        rank: Option<usize>,
        /// Use a random mixed state instead of a pure one.
        #[arg(long)]
        mixed: bool,
        /// Grid size of the phase sweep.
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
}

fn emit<T: Serialize>(cli: &Cli, stem: &str, value: &T, text: impl Fn(&T) -> String) -> CliResult<()> {
    let (body, ext) = match cli.format {
        Format::Text => (text(value), "txt"),
        Format::Structured => (
            serde_json::to_string_pretty(value).expect("reports always serialize") + "\n",
            "json",
        ),
    };
    print!("{body}");
    if let Some(dir) = &cli.out {
        write_atomic(&dir.join(format!("{stem}.{ext}")), &body)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<i32> {
    let overrides = Overrides {
        tolerance: cli.tolerance,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Check { scenario } => {
            let report = histlab_cli::run_scenario(scenario, &overrides)?;
            emit(cli, "report", &report, render::report)?;
            Ok(report.exit_code())
        }
        Command::Search { config, sequential } => {
            let exec = if *sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let report = histlab_cli::run_search(config, &overrides, cli.out.as_deref(), exec)?;
            emit(cli, "search", &report, render::search)?;
            Ok(0)
        }
        Command::Compose { a, b } => {
            let report = histlab_cli::compose_files(a, b, &overrides)?;
            emit(cli, "compose", &report, render::compose)?;
            Ok(0)
        }
        Command::Appendix { dim, rank, mixed, steps } => {
            let params = AppendixParams {
                dim: *dim,
                rank: *rank,
                mixed: *mixed,
                steps: *steps,
            };
            let report = histlab_cli::run_appendix(&params, &overrides)?;
            emit(cli, "appendix", &report, render::appendix)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
