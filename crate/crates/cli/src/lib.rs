//! Command-line front end: CSV ingestion, one function per subcommand,
//! and table or JSON rendering of the resulting reports.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod format;

pub use args::Cli;
pub use error::{CliError, CliResult};

use args::Command;

/// Executes a parsed command line and returns the text for standard output.
pub fn run(cli: &Cli) -> CliResult<String> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?
            .install(|| dispatch(&cli.command)),
        None => dispatch(&cli.command),
    }
}

fn dispatch(command: &Command) -> CliResult<String> {
    match command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Asymptotics(a) => commands::asymptotics(a),
        Command::Enumerate(a) => commands::enumerate(a),
        Command::Bias(a) => commands::bias(a),
    }
}
