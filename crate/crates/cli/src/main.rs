//! `hairec` command-line front end.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hairec_core::belief::FilterMode;
use hairec_core::Error;

#[derive(Debug, Parser)]
#[command(name = "hairec", version, about = "Recommendations for a partially observed system operated by a human")]
struct Cli {
    /// Worker threads for parallel phases (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check machine, human, model and experiment files.
    Validate {
        paths: Vec<PathBuf>,
        /// Experiment configuration; validates every model it references.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the adherence model and certify its accuracy.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Train on trajectories from this CSV instead of generating them.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Also write the generated training trajectories.
        #[arg(long)]
        save_dataset: bool,
    },
    /// Solve recommendation policies for every reward variant.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Also solve the exact-human policy by point-based value iteration.
        #[arg(long)]
        exact: bool,
    },
    /// Simulate closed-loop episodes and write their trajectories.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Scenario to simulate (default: ideal, optimal and naive).
        #[arg(long, value_enum)]
        scenario: Vec<SimScenario>,
        /// Internal-state filter of the exact-human agent.
        #[arg(long, value_enum, default_value = "bayes")]
        mode: ModeArg,
    },
    /// Full pipeline: model, solve, simulate, aggregate.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Summarize the artifacts of a finished experiment.
    Report {
        /// Experiment output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Trained adherence model to use instead of training one.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimScenario {
    Ideal,
    Optimal,
    Naive,
    /// Exact information-state policy with the true human model.
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Bayes,
    #[value(name = "paper_literal")]
    PaperLiteral,
}

impl From<ModeArg> for FilterMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Bayes => FilterMode::Bayes,
            ModeArg::PaperLiteral => FilterMode::PaperLiteral,
        }
    }
}

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{context}: {e}"))
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Json(j) if j.is_io() => EXIT_IO,
        Error::Csv(c) if c.is_io_error() => EXIT_IO,
        Error::NonFinite(_)
        | Error::ImpossibleObservation
        | Error::ImpossibleHumanAction
        | Error::HistoryImpossible
        | Error::VectorSetExplosion { .. } => EXIT_NUMERIC,
        _ => EXIT_VALIDATION,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::new(exit_code(&e), e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(EXIT_VALIDATION, format!("--jobs {n}: {e}")))?;
    }
    match cli.command {
        Command::Validate { paths, config } => commands::validate(&paths, config.as_deref()),
        Command::Train {
            run,
            dataset,
            save_dataset,
        } => commands::train(&run.into(), dataset.as_deref(), save_dataset),
        Command::Solve { run, exact } => commands::solve(&run.into(), exact),
        Command::Simulate { run, scenario, mode } => {
            let scenarios = if scenario.is_empty() {
                vec![commands::SimKind::Ideal, commands::SimKind::Optimal, commands::SimKind::Naive]
            } else {
                scenario.into_iter().map(Into::into).collect()
            };
            commands::simulate(&run.into(), &scenarios, mode.into())
        }
        Command::Experiment { run } => commands::experiment(&run.into()),
        Command::Report { out } => commands::report(&out),
    }
}

impl From<RunArgs> for commands::RunOptions {
    fn from(a: RunArgs) -> Self {
        Self {
            config: a.config,
            seed: a.seed,
            out: a.out,
            model: a.model,
        }
    }
}

impl From<SimScenario> for commands::SimKind {
    fn from(s: SimScenario) -> Self {
        match s {
            SimScenario::Ideal => Self::Ideal,
            SimScenario::Optimal => Self::Optimal,
            SimScenario::Naive => Self::Naive,
            SimScenario::Exact => Self::Exact,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
