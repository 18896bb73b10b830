// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Library side of the `lvgrape` command: configuration, file formats,
//! timing sweeps and the oracle suite.

pub mod benchmark;
pub mod check;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pulse_io;

pub use error::{CliError, CliResult};
