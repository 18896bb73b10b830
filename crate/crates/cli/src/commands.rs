// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Subcommand bodies, callable without a process boundary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lvgrape::optimizer::Outcome;
use lvgrape::{optimize, Want};

use crate::benchmark::{run_plan, write_csv, BenchmarkPlan, BenchmarkResult};
use crate::check::{run_checks, CheckReport, Fault};
use crate::config::LoadedConfig;
use crate::error::{io, CliError, CliResult};
use crate::output::{write_summary, write_trace, Summary};
use crate::pulse_io::write_pulse;

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

/// Files written by [`cmd_optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeArtifacts {
    pub pulse: PathBuf,
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub outcome: Outcome,
}

pub fn cmd_optimize(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<OptimizeArtifacts> {
    let loaded = LoadedConfig::from_path(config)?;
    let problem = loaded.problem(seed)?;
    let cfg = loaded.optimizer_config()?;
    ensure_dir(out)?;
    let start = Instant::now();
    let initial_fidelity = problem.evaluate(&problem.initial, Want::Fidelity)?.fidelity;
    let outcome = optimize(&problem, &cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let o = &loaded.config.output;
    let (pulse, trace, summary) = (out.join(&o.pulse), out.join(&o.trace), out.join(&o.summary));
    write_pulse(&outcome.pulse, &pulse)?;
    write_trace(&outcome.trace, &trace)?;
    let s = Summary {
        stop: outcome.stop.name().to_string(),
        fidelity: outcome.fidelity,
        initial_fidelity,
        iterations: outcome.trace.len(),
        accepted_steps: outcome.accepted_steps(),
        slices: outcome.pulse.len(),
        dt_s: outcome.pulse.dt(),
        members: problem.ensemble.len(),
        derivatives: problem.method.name().to_string(),
        hessian: problem.hessian_mode.name().to_string(),
        seed: seed.unwrap_or(loaded.config.problem.seed),
        threads: rayon::current_num_threads(),
        wall_time_s: wall,
    };
    write_summary(&s, &summary)?;
    Ok(OptimizeArtifacts {
        pulse,
        trace,
        summary,
        outcome,
    })
}

/// Runs a plan and writes `benchmark.csv` under `out`.
pub fn cmd_benchmark(
    plan: &Path,
    out: &Path,
    progress: impl FnMut(&crate::benchmark::Measurement),
) -> CliResult<(PathBuf, BenchmarkResult)> {
    let plan = BenchmarkPlan::from_path(plan)?;
    ensure_dir(out)?;
    let result = run_plan(&plan, progress)?;
    let path = out.join("benchmark.csv");
    let file = File::create(&path).map_err(|e| io(&path, e))?;
    write_csv(&result, BufWriter::new(file))?;
    Ok((path, result))
}

/// Runs the oracle suite; a failing check becomes [`CliError::CheckFailed`]
/// after `report` has seen the results.
pub fn cmd_check(
    config: &Path,
    seed: Option<u64>,
    fault: Option<Fault>,
    report: impl FnOnce(&CheckReport),
) -> CliResult<CheckReport> {
    let loaded = LoadedConfig::from_path(config)?;
    let problem = loaded.problem(seed)?;
    let result = run_checks(&problem, loaded.config.problem.control_scale, fault)?;
    report(&result);
    if result.passed() {
        Ok(result)
    } else {
        Err(CliError::CheckFailed(result.failures().join(", ")))
    }
}
