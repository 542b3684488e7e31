//! The `vqaug` command line: one subcommand per pipeline stage, a JSON config
//! file underneath the flags, and stable exit codes.

mod config;
mod run;

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;

use thiserror::Error;

pub use config::{load_config, read_config_file, PartialConfig, ReportFormat, RunConfig, Subcommand};
pub use run::{execute, metadata_block, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    BadConfig(String),
    /// Input data or schema problem. `code` names the stage that refused it.
    #[error("{message}")]
    Data { code: &'static str, message: String },
    #[error("{0}")]
    Provider(String),
}

impl CliError {
    pub fn data(code: &'static str, message: impl ToString) -> Self {
        CliError::Data { code, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::BadConfig(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Provider(_) => 3,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::BadConfig(_) => "bad_config",
            CliError::Data { code, .. } => code,
            CliError::Provider(_) => "provider",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({"error": {"code": self.code(), "message": self.to_string()}})
    }
}

/// Run the CLI against the process's standard streams.
pub fn run<I, T>(argv: I, env: &HashMap<String, String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, env, &mut stdout.lock(), &mut stderr.lock())
}

/// Run the CLI with explicit output streams. Returns the exit code.
pub fn run_with<I, T>(
    argv: I,
    env: &HashMap<String, String>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run::parse_and_execute(argv, env) {
        Ok(run::Outcome::Summary(summary)) => {
            let _ = writeln!(stdout, "{summary}");
            0
        }
        Ok(run::Outcome::Text(text)) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
