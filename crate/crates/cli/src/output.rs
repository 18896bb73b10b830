// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Iteration trace and run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lvgrape::optimizer::IterationRecord;
use serde::Serialize;

use crate::error::{io, CliError, CliResult};
use crate::pulse_io::fmt17;

pub const TRACE_HEADER: [&str; 9] = [
    "iteration",
    "fidelity",
    "gradient_norm",
    "step_norm",
    "min_eigenvalue",
    "backtracks",
    "time_objective_s",
    "time_solve_s",
    "time_line_search_s",
];

pub fn write_trace_to<W: Write>(trace: &[IterationRecord], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(TRACE_HEADER).map_err(err)?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            fmt17(r.fidelity),
            fmt17(r.gradient_norm),
            fmt17(r.step_norm),
            fmt17(r.min_eigenvalue),
            r.backtracks.to_string(),
            format!("{:.6e}", r.time_objective),
            format!("{:.6e}", r.time_solve),
            format!("{:.6e}", r.time_line_search),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_trace(trace: &[IterationRecord], path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    write_trace_to(trace, BufWriter::new(file))
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub stop: String,
    pub fidelity: f64,
    pub initial_fidelity: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub slices: usize,
    pub dt_s: f64,
    pub members: usize,
    pub derivatives: String,
    pub hessian: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
}

pub fn write_summary(summary: &Summary, path: &Path) -> CliResult<()> {
    let text = toml::to_string(summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| io(path, e))
}
