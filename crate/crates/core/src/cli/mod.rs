//! Batch front end: `signflow <command> [config]`.

pub mod checks;
pub mod config;
pub mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

pub use config::{ConfigError, RunConfig};
pub use run::{run, Command, RunError, RunSummary, SolutionEntry, EXIT_CONFIG};

#[derive(Debug, Parser)]
#[command(
    name = "signflow",
    version,
    about = "Positive, negative and sign-changing solutions of -Δu = f(u)"
)]
pub struct Cli {
    pub command: Command,
    /// Flat `key = value` file; defaults apply to omitted keys.
    pub config: Option<PathBuf>,
    /// Overrides the `output` key.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Cli {
    pub fn config(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.output {
            cfg.output = out.clone();
        }
        Ok(cfg)
    }

    pub fn execute(&self) -> ExitCode {
        let cfg = match self.config() {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        match run(self.command, &cfg) {
            Ok(summary) => {
                print!("{}", summary.to_text());
                ExitCode::from(summary.exit_code())
            }
            Err(RunError::Config(e)) => {
                eprintln!("config error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(run::EXIT_SOLVER)
            }
        }
    }
}
