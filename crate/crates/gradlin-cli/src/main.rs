use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradlin_cli::commands::{self, CliError, Options, Outcome};

/// Linearize graded manifold charts and check the resulting operator families.
#[derive(Parser)]
#[command(name = "gradlin", version)]
struct Cli {
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Truncation degree; overrides the system file.
    #[arg(long, global = true)]
    trunc: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the defining conditions of a weight system.
    Validate { file: String },
    /// Print the linearized system and, with a chart block, its generators and operators.
    Linearize {
        file: String,
        /// Group the linearized system by the weight each element lies over.
        #[arg(long)]
        fibers: bool,
    },
    /// Check the six properties of the operator family of the linearized chart.
    Check {
        file: String,
        /// Also check random charts over the same system.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Solve D^lambda(F) = f on the linearized chart.
    Invert {
        file: String,
        /// Operators such as `b2_1,b3_1`; the last acts first.
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        f: String,
    },
    /// Negate the weights outside a base subsystem.
    Dualize {
        file: String,
        /// Base weights as coefficient rows, such as `0,0;1,0`.
        #[arg(long)]
        base: String,
    },
    /// Rebuild a degree-2 chart from its linearization.
    Reconstruct { file: String },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let opts = Options {
        json: cli.json,
        trunc: cli.trunc,
    };
    let read = |path: &str| std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")));
    match cli.command {
        Command::Validate { file } => commands::validate(&file, &read(&file)?, opts),
        Command::Linearize { file, fibers } => commands::linearize(&file, &read(&file)?, fibers, opts),
        Command::Check { file, seed, samples } => commands::check(&file, &read(&file)?, seed, samples, opts),
        Command::Invert { file, lambda, f } => commands::invert(&file, &read(&file)?, &lambda, &f, opts),
        Command::Dualize { file, base } => commands::dualize(&file, &read(&file)?, &base, opts),
        Command::Reconstruct { file } => commands::reconstruct(&file, &read(&file)?, opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.output);
            ExitCode::from(if outcome.success { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
