// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Failure of a command, mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::CheckFailed(_) => 3,
            CliError::Io(_) | CliError::Runtime(_) => 4,
        }
    }
}

/// I/O failure on `path`, message passed through verbatim.
pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

impl From<lvgrape::Error> for CliError {
    fn from(e: lvgrape::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
