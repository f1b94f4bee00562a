//! Command-line front end for the `cqlqg` library.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use commands::run;
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Check physical realizability and the initial state.
    Validate,
    /// Integrate the closed loop under the scenario's controller.
    Simulate,
    /// Synthesize optimal controller gains.
    Optimize,
    /// Optimize, then run the verification suite.
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "cqlqg", version, about = "Coherent quantum LQG controller synthesis")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    /// Scenario file (JSON, schema cqlqg.scenario/v1).
    #[arg(long, required_unless_present = "emit_template")]
    pub scenario: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, required_unless_present = "emit_template")]
    pub out: Option<PathBuf>,

    /// Override a scenario field, e.g. `grid.steps=100` or `k1.0.1=0.5`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,

    /// Worker threads for per-node work.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Print a template scenario and exit.
    #[arg(long)]
    pub emit_template: bool,
}

impl Cli {
    pub fn configure_threads(&self) -> Result<(), CliError> {
        let Some(n) = self.threads else {
            return Ok(());
        };
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}
