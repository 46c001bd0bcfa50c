//! Experiment driver behind the `transfer` binary.

pub mod commands;
pub mod config;
pub mod selftest;

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("refuted: {0}")]
    Refuted(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Refuted(_) => 3,
        }
    }
}

impl From<transfer_core::Error> for CliError {
    fn from(e: transfer_core::Error) -> Self {
        use transfer_core::Error as E;
        match e {
            E::NotConverged { .. } | E::Fit(_) | E::ContractionBound(_) => {
                CliError::Numerical(e.to_string())
            }
            E::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Refuted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Passed => 0,
            Outcome::Refuted => 3,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Passed
        } else {
            Outcome::Refuted
        }
    }
}

/// Every JSON artifact carries the tool version and the resolved config.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub result: T,
}

/// Artifact sink rooted at the output directory.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(
        &self,
        name: &str,
        command: &str,
        config: &ExperimentConfig,
        result: T,
    ) -> Result<(), CliError> {
        let env = Envelope {
            tool: "transfer",
            version: VERSION,
            command,
            config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)
            .map_err(|e| CliError::Numerical(format!("serializing {name}: {e}")))?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        Ok(())
    }
}
