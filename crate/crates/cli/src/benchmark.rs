// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Timing sweeps.
//!
//! ```toml
//! sweep = "n"                 # n | dt | t
//! values = [128, 256, 512]
//! dt = 7.8125e-6              # exactly one of n, dt, t besides the swept one
//! repeats = 3
//! min_seconds = 0.0           # keep sampling new pulses until this much was timed
//! quantities = ["fidelity", "gradient", "hessian_standard", "hessian_accelerated"]
//! methods = ["auxmat", "escalade"]
//! exclude = ["hessian_standard:escalade"]   # optional quantity:method pairs
//! ensemble_count = 101
//! bandwidth_hz = 1000.0
//! control_scale = 6283.185307179586
//! seed = 1
//! initial_state = "z"
//! target_state = "x"
//! ```
//!
//! With `sweep = "t"` or a fixed `t`, the remaining variable follows from
//! `t = n * dt`; a derived slice count must be a whole number.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use lvgrape::{
    ensemble_objective, named_state, random_pulse, uniform_band, DerivativeMethod, HessianMode,
    NamedState, StateVector, Want,
};
use serde::Deserialize;

use crate::error::{io, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 17] = [
    "schema_version",
    "sweep",
    "n",
    "dt_s",
    "duration_s",
    "members",
    "threads",
    "quantity",
    "method",
    "backend",
    "repeats",
    "median_s",
    "mean_s",
    "min_s",
    "max_s",
    "speedup_vs_standard_auxmat",
    "speedup_vs_accelerated_auxmat",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    N,
    Dt,
    T,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::N => "n",
            SweepVariable::Dt => "dt",
            SweepVariable::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Fidelity,
    Gradient,
    HessianStandard,
    HessianAccelerated,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [
        Quantity::Fidelity,
        Quantity::Gradient,
        Quantity::HessianStandard,
        Quantity::HessianAccelerated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Fidelity => "fidelity",
            Quantity::Gradient => "gradient",
            Quantity::HessianStandard => "hessian_standard",
            Quantity::HessianAccelerated => "hessian_accelerated",
        }
    }

    fn want(self) -> Want {
        match self {
            Quantity::Fidelity => Want::Fidelity,
            Quantity::Gradient => Want::Gradient,
            _ => Want::Hessian,
        }
    }

    pub fn backend(self) -> Option<HessianMode> {
        match self {
            Quantity::HessianStandard => Some(HessianMode::Standard),
            Quantity::HessianAccelerated => Some(HessianMode::Accelerated),
            _ => None,
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| format!("unknown quantity `{s}`"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    sweep: SweepVariable,
    values: Vec<f64>,
    n: Option<usize>,
    dt: Option<f64>,
    t: Option<f64>,
    #[serde(default = "three")]
    repeats: usize,
    #[serde(default)]
    min_seconds: f64,
    #[serde(default = "all_quantities")]
    quantities: Vec<Quantity>,
    #[serde(default = "both_methods")]
    methods: Vec<String>,
    #[serde(default)]
    exclude: Vec<String>,
    #[serde(default = "one")]
    ensemble_count: usize,
    #[serde(default = "bandwidth")]
    bandwidth_hz: f64,
    #[serde(default = "scale")]
    control_scale: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "z")]
    initial_state: String,
    #[serde(default = "x")]
    target_state: String,
}

fn three() -> usize {
    3
}
fn one() -> usize {
    1
}
fn all_quantities() -> Vec<Quantity> {
    Quantity::ALL.to_vec()
}
fn both_methods() -> Vec<String> {
    vec!["auxmat".into(), "escalade".into()]
}
fn bandwidth() -> f64 {
    1000.0
}
fn scale() -> f64 {
    2.0 * std::f64::consts::PI * 1000.0
}
fn z() -> String {
    "z".into()
}
fn x() -> String {
    "x".into()
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub n: usize,
    pub dt: f64,
}

impl Point {
    pub fn duration(&self) -> f64 {
        self.n as f64 * self.dt
    }
}

/// A validated timing plan.
#[derive(Debug, Clone)]
pub struct BenchmarkPlan {
    pub sweep: SweepVariable,
    pub points: Vec<Point>,
    /// Minimum number of timed evaluations per measurement.
    pub repeats: usize,
    /// Further evaluations are timed (up to [`MAX_SAMPLES`]) until their
    /// total reaches this.
    pub min_seconds: f64,
    /// (quantity, method) pairs in timing order.
    pub jobs: Vec<(Quantity, DerivativeMethod)>,
    pub ensemble_count: usize,
    pub bandwidth_hz: f64,
    pub control_scale: f64,
    pub seed: u64,
    pub rho0: StateVector,
    pub sigma: StateVector,
}

impl BenchmarkPlan {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(source: &str) -> CliResult<Self> {
        let raw: RawPlan = toml::from_str(source)
            .map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        let bad = |key: &str, msg: String| invalid_top(source, key, msg);
        if raw.values.is_empty() {
            return Err(bad("values", "must not be empty".into()));
        }
        if raw.repeats == 0 {
            return Err(bad("repeats", "must be at least 1".into()));
        }
        if !(raw.min_seconds >= 0.0 && raw.min_seconds.is_finite()) {
            return Err(bad("min_seconds", "must be a nonnegative number".into()));
        }
        if raw.quantities.is_empty() {
            return Err(bad("quantities", "must not be empty".into()));
        }
        if raw.methods.is_empty() {
            return Err(bad("methods", "must not be empty".into()));
        }
        let fixed: Vec<&str> = [
            ("n", raw.n.is_some()),
            ("dt", raw.dt.is_some()),
            ("t", raw.t.is_some()),
        ]
        .into_iter()
        .filter(|(_, set)| *set)
        .map(|(k, _)| k)
        .collect();
        if fixed.contains(&raw.sweep.name()) {
            return Err(bad(
                raw.sweep.name(),
                "is the swept variable and cannot also be fixed".into(),
            ));
        }
        if fixed.len() != 1 {
            return Err(bad(
                "sweep",
                format!(
                    "exactly one of the other two variables must be fixed, found {}",
                    fixed.len()
                ),
            ));
        }
        let mut points = Vec::with_capacity(raw.values.len());
        for &v in &raw.values {
            let point = match raw.sweep {
                SweepVariable::N => {
                    let n = whole(v)
                        .ok_or_else(|| bad("values", format!("{v} is not a slice count")))?;
                    match (raw.dt, raw.t) {
                        (Some(dt), _) => Point { n, dt },
                        (_, Some(t)) => Point {
                            n,
                            dt: t / n as f64,
                        },
                        _ => unreachable!(),
                    }
                }
                SweepVariable::Dt => match (raw.n, raw.t) {
                    (Some(n), _) => Point { n, dt: v },
                    (_, Some(t)) => Point {
                        n: whole(t / v).ok_or_else(|| {
                            bad("values", format!("t / {v} is not a whole slice count"))
                        })?,
                        dt: v,
                    },
                    _ => unreachable!(),
                },
                SweepVariable::T => match (raw.n, raw.dt) {
                    (Some(n), _) => Point {
                        n,
                        dt: v / n as f64,
                    },
                    (_, Some(dt)) => Point {
                        n: whole(v / dt).ok_or_else(|| {
                            bad("values", format!("{v} / dt is not a whole slice count"))
                        })?,
                        dt,
                    },
                    _ => unreachable!(),
                },
            };
            if point.n == 0 || !(point.dt > 0.0 && point.dt.is_finite()) {
                return Err(bad(
                    "values",
                    format!("{v} gives an empty or invalid grid point"),
                ));
            }
            points.push(point);
        }
        let mut methods = Vec::new();
        for m in &raw.methods {
            methods.push(
                m.parse::<DerivativeMethod>()
                    .map_err(|e| bad("methods", e.to_string()))?,
            );
        }
        let mut excluded = Vec::new();
        for e in &raw.exclude {
            let parsed = e.split_once(':').and_then(|(q, m)| {
                Some((
                    q.parse::<Quantity>().ok()?,
                    m.parse::<DerivativeMethod>().ok()?,
                ))
            });
            excluded.push(
                parsed.ok_or_else(|| bad("exclude", format!("`{e}` is not `quantity:method`")))?,
            );
        }
        let jobs = raw
            .quantities
            .iter()
            .flat_map(|&q| methods.iter().map(move |&m| (q, m)))
            .filter(|job| !excluded.contains(job))
            .collect::<Vec<_>>();
        if jobs.is_empty() {
            return Err(bad("exclude", "removes every quantity".into()));
        }
        uniform_band(raw.ensemble_count, raw.bandwidth_hz)
            .map_err(|e| bad("ensemble_count", e.to_string()))?;
        if !(raw.control_scale > 0.0 && raw.control_scale.is_finite()) {
            return Err(bad("control_scale", "must be positive".into()));
        }
        let state = |key: &str, name: &str| {
            name.parse::<NamedState>()
                .map(named_state)
                .map_err(|e| bad(key, e.to_string()))
        };
        Ok(BenchmarkPlan {
            sweep: raw.sweep,
            points,
            repeats: raw.repeats,
            min_seconds: raw.min_seconds,
            jobs,
            ensemble_count: raw.ensemble_count,
            bandwidth_hz: raw.bandwidth_hz,
            control_scale: raw.control_scale,
            seed: raw.seed,
            rho0: state("initial_state", &raw.initial_state)?,
            sigma: state("target_state", &raw.target_state)?,
        })
    }
}

fn whole(v: f64) -> Option<usize> {
    let r = v.round();
    ((v - r).abs() <= 1e-9 * v.abs().max(1.0) && r >= 1.0).then_some(r as usize)
}

fn invalid_top(source: &str, key: &str, msg: String) -> CliError {
    let line = source
        .lines()
        .position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key))
        .map(|i| format!(" (line {})", i + 1))
        .unwrap_or_default();
    CliError::Config(format!("`{key}`{line}: {msg}"))
}

/// Timings of one (point, quantity, method).
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub point: Point,
    pub quantity: Quantity,
    pub method: DerivativeMethod,
    pub samples: Vec<f64>,
}

impl Measurement {
    pub fn median(&self) -> f64 {
        median(&self.samples)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }
}

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// All measurements of a plan, in grid order.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub sweep: SweepVariable,
    pub members: usize,
    pub threads: usize,
    pub measurements: Vec<Measurement>,
}

impl BenchmarkResult {
    pub fn find(
        &self,
        point: usize,
        quantity: Quantity,
        method: DerivativeMethod,
    ) -> Option<&Measurement> {
        let p = self.points().get(point).copied()?;
        self.measurements
            .iter()
            .find(|m| m.point == p && m.quantity == quantity && m.method == method)
    }

    pub fn points(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for m in &self.measurements {
            if !out.contains(&m.point) {
                out.push(m.point);
            }
        }
        out
    }

    /// Ratio of the standard auxmat Hessian median to this one.
    pub fn speedup(&self, m: &Measurement, reference: Quantity) -> Option<f64> {
        m.quantity.backend()?;
        let r = self.measurements.iter().find(|r| {
            r.point == m.point && r.quantity == reference && r.method == DerivativeMethod::Auxmat
        })?;
        Some(r.median() / m.median())
    }
}

/// Upper bound on samples per measurement when `min_seconds` is set.
pub const MAX_SAMPLES: usize = 200;

/// Runs every grid point in order. For each point and job one discarded
/// warm-up evaluation precedes the timed ones; timed evaluation `r` uses its
/// own random pulse drawn with seed `seed + r`, so every job at a point sees
/// the same pulses. `progress` sees each finished measurement.
pub fn run_plan(
    plan: &BenchmarkPlan,
    mut progress: impl FnMut(&Measurement),
) -> CliResult<BenchmarkResult> {
    let ensemble = uniform_band(plan.ensemble_count, plan.bandwidth_hz)?;
    let mut measurements = Vec::new();
    for &point in &plan.points {
        let mut pulses = Vec::new();
        for &(quantity, method) in &plan.jobs {
            let mode = quantity.backend().unwrap_or(HessianMode::Accelerated);
            let mut samples: Vec<f64> = Vec::with_capacity(plan.repeats);
            loop {
                let r = samples.len();
                let enough = r >= plan.repeats
                    && (samples.iter().sum::<f64>() >= plan.min_seconds || r >= MAX_SAMPLES);
                if enough {
                    break;
                }
                if pulses.len() == r {
                    pulses.push(random_pulse(
                        point.n,
                        plan.control_scale,
                        plan.seed.wrapping_add(r as u64),
                        point.dt,
                    )?);
                }
                let eval = || {
                    ensemble_objective(
                        &ensemble,
                        &pulses[r],
                        &plan.rho0,
                        &plan.sigma,
                        quantity.want(),
                        method,
                        mode,
                    )
                };
                if r == 0 {
                    std::hint::black_box(eval()?);
                }
                let start = Instant::now();
                let out = eval()?;
                samples.push(start.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            let m = Measurement {
                point,
                quantity,
                method,
                samples,
            };
            progress(&m);
            measurements.push(m);
        }
    }
    Ok(BenchmarkResult {
        sweep: plan.sweep,
        members: ensemble.len(),
        threads: rayon::current_num_threads(),
        measurements,
    })
}

pub fn write_csv<W: Write>(result: &BenchmarkResult, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(err)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for m in &result.measurements {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            result.sweep.name().to_string(),
            m.point.n.to_string(),
            format!("{:e}", m.point.dt),
            format!("{:e}", m.point.duration()),
            result.members.to_string(),
            result.threads.to_string(),
            quantity_column(m.quantity).to_string(),
            m.method.name().to_string(),
            m.quantity
                .backend()
                .map(|b| b.name())
                .unwrap_or("none")
                .to_string(),
            m.samples.len().to_string(),
            format!("{:.6e}", m.median()),
            format!("{:.6e}", m.mean()),
            format!("{:.6e}", m.min()),
            format!("{:.6e}", m.max()),
            opt(result.speedup(m, Quantity::HessianStandard)),
            opt(result.speedup(m, Quantity::HessianAccelerated)),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn quantity_column(q: Quantity) -> &'static str {
    match q {
        Quantity::Fidelity => "fidelity",
        Quantity::Gradient => "gradient",
        _ => "hessian",
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Median timings keyed by quantity and method, one vector per key in grid
/// order.
pub fn medians(result: &BenchmarkResult) -> BTreeMap<(Quantity, String), Vec<f64>> {
    let mut out: BTreeMap<(Quantity, String), Vec<f64>> = BTreeMap::new();
    for m in &result.measurements {
        out.entry((m.quantity, m.method.name().to_string()))
            .or_default()
            .push(m.median());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const N_SWEEP: &str = "sweep = \"n\"\nvalues = [4, 8]\ndt = 7.8125e-6\nrepeats = 2\n";

    #[test]
    fn sweep_designs() {
        let p = BenchmarkPlan::parse(N_SWEEP).unwrap();
        assert_eq!(
            p.points,
            vec![
                Point {
                    n: 4,
                    dt: 7.8125e-6
                },
                Point {
                    n: 8,
                    dt: 7.8125e-6
                }
            ]
        );
        assert_eq!(p.jobs.len(), 8);

        let p = BenchmarkPlan::parse("sweep = \"dt\"\nvalues = [1e-6, 2e-6]\nn = 128\n").unwrap();
        assert_eq!(p.points[1], Point { n: 128, dt: 2e-6 });

        let p = BenchmarkPlan::parse("sweep = \"n\"\nvalues = [100, 1000]\nt = 1e-3\n").unwrap();
        assert_eq!(p.points[0].n, 100);
        assert!((p.points[1].duration() - 1e-3).abs() < 1e-18);

        let p = BenchmarkPlan::parse("sweep = \"t\"\nvalues = [1e-3]\ndt = 1e-5\n").unwrap();
        assert_eq!(p.points[0].n, 100);
    }

    #[test]
    fn invalid_plans_name_the_key() {
        for (src, key) in [
            ("sweep = \"n\"\nvalues = []\ndt = 1e-5\n", "values"),
            (
                "sweep = \"n\"\nvalues = [4]\ndt = 1e-5\nrepeats = 0\n",
                "repeats",
            ),
            ("sweep = \"n\"\nvalues = [4]\n", "sweep"),
            (
                "sweep = \"n\"\nvalues = [4]\ndt = 1e-5\nt = 1e-3\n",
                "sweep",
            ),
            ("sweep = \"n\"\nvalues = [4.5]\ndt = 1e-5\n", "values"),
            (
                "sweep = \"n\"\nvalues = [4]\ndt = 1e-5\nmethods = [\"taylor\"]\n",
                "methods",
            ),
        ] {
            let msg = BenchmarkPlan::parse(src).unwrap_err().to_string();
            assert!(msg.contains(&format!("`{key}`")), "{src} -> {msg}");
        }
        assert!(BenchmarkPlan::parse(&format!("{N_SWEEP}colour = 1\n")).is_err());
    }

    #[test]
    fn exclusions_and_csv() {
        let src = format!("{N_SWEEP}exclude = [\"hessian_standard:escalade\"]\n");
        let plan = BenchmarkPlan::parse(&src).unwrap();
        assert_eq!(plan.jobs.len(), 7);
        let mut seen = 0;
        let result = run_plan(&plan, |_| seen += 1).unwrap();
        assert_eq!(seen, 14);
        let mut buf = Vec::new();
        write_csv(&result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 15);
        for l in &lines[1..] {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), CSV_HEADER.len());
            assert_eq!(f[0], "1");
            assert_eq!(f[10], "2");
            if f[7] == "hessian" {
                assert!(f[15].parse::<f64>().unwrap() > 0.0);
                if f[9] == "standard" && f[8] == "auxmat" {
                    assert_eq!(f[15], "1.000000");
                }
            } else {
                assert_eq!(f[15], "");
            }
        }
    }

    #[test]
    fn min_seconds_adds_samples() {
        let mut plan = BenchmarkPlan::parse("sweep = \"n\"\nvalues = [2]\ndt = 1e-5\nrepeats = 3\nmin_seconds = 0.002\nquantities = [\"fidelity\"]\nmethods = [\"escalade\"]\n").unwrap();
        let r = run_plan(&plan, |_| {}).unwrap();
        let m = &r.measurements[0];
        assert!(m.samples.len() == MAX_SAMPLES || m.samples.iter().sum::<f64>() >= 0.002);
        plan.min_seconds = 0.0;
        assert_eq!(
            run_plan(&plan, |_| {}).unwrap().measurements[0]
                .samples
                .len(),
            3
        );
        assert!(BenchmarkPlan::parse(
            "sweep = \"n\"\nvalues = [2]\ndt = 1e-5\nmin_seconds = -1.0\n"
        )
        .is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((loglog_slope(&x, &y) - 1.7).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
