//! `lindramp` command-line front end. Every subcommand writes data only:
//! CSV with `#` header lines or a single JSON object.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error. Failures print
//! one JSON line `{"error": kind, "code": n, "message": ...}` to stderr.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "lindramp", version, about = "Defect production under a linearly ramped Lindblad coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: RunConfig,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Integrate one momentum mode and write the trajectory.
    Evolve,
    /// Per-momentum defects at the end of the ramp, for each τ.
    DefectProfile,
    /// Momentum-integrated defect densities over a τ list, with a power-law fit.
    DensitySweep,
    /// Exact series coefficients and their growth report.
    Series,
    /// No-jump scaling collapse over a τ list.
    Collapse,
    /// Power-law fit of a density CSV.
    Fit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::DefectProfile => "defect-profile",
            Command::DensitySweep => "density-sweep",
            Command::Series => "series",
            Command::Collapse => "collapse",
            Command::Fit => "fit",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        Self { code: 2, kind: "usage", message }
    }

    pub fn numerical(message: String) -> Self {
        Self { code: 1, kind: "numerical", message }
    }

    fn io(e: std::io::Error) -> Self {
        Self { code: 1, kind: "io", message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", json!({ "error": self.kind, "code": self.code, "message": self.message }))
    }
}

impl From<lindramp::Error> for CliError {
    fn from(e: lindramp::Error) -> Self {
        match e {
            lindramp::Error::InvalidParams(_) | lindramp::Error::DegenerateMode(_) => Self::usage(e.to_string()),
            _ => Self::numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    let name = cli.command.name();
    match cli.command {
        Command::Evolve => commands::evolve(&cfg, name),
        Command::DefectProfile if cfg.collapse => commands::collapse(&cfg, name),
        Command::DefectProfile => commands::defect_profile(&cfg, name),
        Command::DensitySweep => commands::density_sweep(&cfg, name),
        Command::Series => commands::series(&cfg, name),
        Command::Collapse => commands::collapse(&cfg, name),
        Command::Fit => commands::fit(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
