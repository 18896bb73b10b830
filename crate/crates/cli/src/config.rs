// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration (TOML).
//!
//! ```toml
//! [problem]
//! slices = 128                 # N
//! dt = 7.8125e-6               # s
//! initial_state = "z"          # x | y | z, or [[re, im], [re, im], [re, im]]
//! target_state = "x"
//! ensemble_count = 101
//! bandwidth_hz = 1000.0
//! control_scale = 6283.185307179586   # rad/s, random start amplitude
//! seed = 1
//! # initial_pulse = "start.csv"       # optional, overrides the random start
//!
//! [method]
//! derivatives = "escalade"     # auxmat | escalade
//! hessian = "accelerated"      # standard | accelerated
//!
//! [optimizer]                  # every key optional
//! max_iterations = 100
//! gradient_tolerance = 1e-12
//! fidelity_target = 0.999999999
//! regularization = "eigen_shift"      # eigen_shift | rational_function
//! max_step = 31415.926535897932       # rad/s, infinity norm of a step
//! armijo_c1 = 1e-4
//! backtrack_factor = 0.5
//! max_backtracks = 30
//! use_hessian = true
//!
//! [output]                     # file names, relative to --out
//! pulse = "pulse.csv"
//! trace = "trace.csv"
//! summary = "summary.toml"
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use lvgrape::{
    named_state, random_pulse, uniform_band, ControlPulse, DerivativeMethod, HessianMode,
    NamedState, OptimizerConfig, Problem, Regularization, StateVector, C64,
};
use serde::Deserialize;

use crate::error::{io, CliError, CliResult};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub method: MethodSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Explicit([[f64; 2]; 3]),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub slices: usize,
    pub dt: f64,
    #[serde(default = "default_initial")]
    pub initial_state: StateSpec,
    #[serde(default = "default_target")]
    pub target_state: StateSpec,
    #[serde(default = "one")]
    pub ensemble_count: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_scale")]
    pub control_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_pulse: Option<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    #[serde(default = "default_derivatives")]
    pub derivatives: String,
    #[serde(default = "default_hessian")]
    pub hessian: String,
}

impl Default for MethodSection {
    fn default() -> Self {
        MethodSection {
            derivatives: default_derivatives(),
            hessian: default_hessian(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iterations: Option<usize>,
    pub gradient_tolerance: Option<f64>,
    pub fidelity_target: Option<f64>,
    pub regularization: Option<String>,
    pub max_step: Option<f64>,
    pub armijo_c1: Option<f64>,
    pub backtrack_factor: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub use_hessian: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_pulse_file")]
    pub pulse: String,
    #[serde(default = "default_trace_file")]
    pub trace: String,
    #[serde(default = "default_summary_file")]
    pub summary: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            pulse: default_pulse_file(),
            trace: default_trace_file(),
            summary: default_summary_file(),
        }
    }
}

fn default_initial() -> StateSpec {
    StateSpec::Named("z".into())
}
fn default_target() -> StateSpec {
    StateSpec::Named("x".into())
}
fn one() -> usize {
    1
}
fn default_bandwidth() -> f64 {
    1000.0
}
fn default_scale() -> f64 {
    2.0 * std::f64::consts::PI * 1000.0
}
fn default_derivatives() -> String {
    "escalade".into()
}
fn default_hessian() -> String {
    "accelerated".into()
}
fn default_pulse_file() -> String {
    "pulse.csv".into()
}
fn default_trace_file() -> String {
    "trace.csv".into()
}
fn default_summary_file() -> String {
    "summary.toml".into()
}

/// 1-based line of `key` inside `[section]`, for diagnostics.
pub(crate) fn line_of(source: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let mut inside = false;
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            inside = t == header;
            continue;
        }
        if inside {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

pub(crate) fn invalid(
    source: &str,
    section: &str,
    key: &str,
    msg: impl std::fmt::Display,
) -> CliError {
    let at = match line_of(source, section, key) {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    };
    CliError::Config(format!("`{section}.{key}`{at}: {msg}"))
}

/// A validated configuration together with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: String,
    /// Directory of the config file; relative input paths resolve here.
    pub base: std::path::PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&source, base)
    }

    pub fn from_str(source: &str, base: std::path::PathBuf) -> CliResult<Self> {
        let config: RunConfig = toml::from_str(source)
            .map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        let loaded = LoadedConfig {
            config,
            source: source.to_string(),
            base,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> CliResult<()> {
        let p = &self.config.problem;
        let src = &self.source;
        if p.slices == 0 {
            return Err(invalid(src, "problem", "slices", "must be at least 1"));
        }
        if !(p.dt > 0.0 && p.dt.is_finite()) {
            return Err(invalid(
                src,
                "problem",
                "dt",
                "must be a positive number of seconds",
            ));
        }
        if p.ensemble_count == 0 {
            return Err(invalid(
                src,
                "problem",
                "ensemble_count",
                "must be at least 1",
            ));
        }
        if !(p.bandwidth_hz > 0.0 && p.bandwidth_hz.is_finite()) {
            return Err(invalid(src, "problem", "bandwidth_hz", "must be positive"));
        }
        if !(p.control_scale > 0.0 && p.control_scale.is_finite()) {
            return Err(invalid(src, "problem", "control_scale", "must be positive"));
        }
        self.state("initial_state", &p.initial_state)?;
        self.state("target_state", &p.target_state)?;
        self.method()?;
        self.hessian_mode()?;
        self.optimizer_config()?;
        Ok(())
    }

    fn state(&self, key: &str, spec: &StateSpec) -> CliResult<StateVector> {
        let state = match spec {
            StateSpec::Named(name) => name
                .parse::<NamedState>()
                .map(named_state)
                .map_err(|e| invalid(&self.source, "problem", key, e))?,
            StateSpec::Explicit(c) => StateVector::from_array(c.map(|[re, im]| C64::new(re, im)))
                .map_err(|e| invalid(&self.source, "problem", key, e))?,
        };
        if state.norm() == 0.0 {
            return Err(invalid(&self.source, "problem", key, "state has zero norm"));
        }
        Ok(state)
    }

    pub fn method(&self) -> CliResult<DerivativeMethod> {
        self.config
            .method
            .derivatives
            .parse()
            .map_err(|e| invalid(&self.source, "method", "derivatives", e))
    }

    pub fn hessian_mode(&self) -> CliResult<HessianMode> {
        self.config
            .method
            .hessian
            .parse()
            .map_err(|e| invalid(&self.source, "method", "hessian", e))
    }

    pub fn optimizer_config(&self) -> CliResult<OptimizerConfig> {
        let o = &self.config.optimizer;
        let d = OptimizerConfig::default();
        let regularization = match &o.regularization {
            Some(r) => r
                .parse::<Regularization>()
                .map_err(|e| invalid(&self.source, "optimizer", "regularization", e))?,
            None => d.regularization,
        };
        let cfg = OptimizerConfig {
            max_iterations: o.max_iterations.unwrap_or(d.max_iterations),
            gradient_tolerance: o.gradient_tolerance.unwrap_or(d.gradient_tolerance),
            fidelity_target: o.fidelity_target.unwrap_or(d.fidelity_target),
            regularization,
            max_step: o.max_step.unwrap_or(d.max_step),
            armijo_c1: o.armijo_c1.unwrap_or(d.armijo_c1),
            backtrack_factor: o.backtrack_factor.unwrap_or(d.backtrack_factor),
            max_backtracks: o.max_backtracks.unwrap_or(d.max_backtracks),
            use_hessian: o.use_hessian.unwrap_or(d.use_hessian),
        };
        cfg.validate().map_err(|e| {
            // name the first offending key
            let key = [
                ("gradient_tolerance", o.gradient_tolerance.is_some()),
                ("fidelity_target", o.fidelity_target.is_some()),
                ("max_step", o.max_step.is_some()),
                ("armijo_c1", o.armijo_c1.is_some()),
                ("backtrack_factor", o.backtrack_factor.is_some()),
            ]
            .into_iter()
            .find(|(k, set)| *set && e.to_string().contains(k))
            .map(|(k, _)| k)
            .unwrap_or("optimizer");
            invalid(&self.source, "optimizer", key, e)
        })?;
        Ok(cfg)
    }

    /// Builds the problem; `seed` overrides the configured seed.
    pub fn problem(&self, seed: Option<u64>) -> CliResult<Problem> {
        let p = &self.config.problem;
        let ensemble = uniform_band(p.ensemble_count, p.bandwidth_hz)?;
        let initial = match &p.initial_pulse {
            Some(file) => {
                let path = self.base.join(file);
                let pulse = crate::pulse_io::read_pulse(&path, Some(p.dt))?;
                if pulse.len() != p.slices {
                    return Err(invalid(
                        &self.source,
                        "problem",
                        "initial_pulse",
                        format!(
                            "{} has {} slices, expected {}",
                            path.display(),
                            pulse.len(),
                            p.slices
                        ),
                    ));
                }
                pulse
            }
            None => random_initial(p.slices, p.control_scale, seed.unwrap_or(p.seed), p.dt)?,
        };
        Ok(Problem {
            ensemble,
            rho0: self.state("initial_state", &p.initial_state)?,
            sigma: self.state("target_state", &p.target_state)?,
            initial,
            method: self.method()?,
            hessian_mode: self.hessian_mode()?,
        })
    }
}

fn random_initial(n: usize, scale: f64, seed: u64, dt: f64) -> CliResult<ControlPulse> {
    Ok(random_pulse(n, scale, seed, dt)?)
}
