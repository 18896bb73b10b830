// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Oracle suite run by `lvgrape check`.

use std::fmt;

use lvgrape::derivatives::slice_derivatives;
use lvgrape::optimizer::gradient_check;
use lvgrape::{
    ensemble_objective, CMat3, DerivativeMethod, DerivativeOrder, Direction, HessianMode, Problem,
    SpinSystem, Want, C64,
};

use crate::error::CliResult;

/// Deliberate corruptions for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Adds `1e-6` to one entry of every auxmat first derivative.
    AuxmatDerivative,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auxmat-derivative" => Ok(Fault::AuxmatDerivative),
            _ => Err(format!("unknown fault `{s}` (expected auxmat-derivative)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} max error {:.3e} (tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.error,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn max_abs(m: &CMat3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn record(checks: &mut Vec<CheckResult>, name: impl Into<String>, error: f64, tolerance: f64) {
    // NaN counts as a failure
    let error = if error.is_nan() { f64::INFINITY } else { error };
    checks.push(CheckResult {
        name: name.into(),
        error,
        tolerance,
    });
}

/// Runs finite-difference, cross-method and cross-backend checks on the
/// problem's initial pulse. `scale` sets the difference step `1e-4 * scale`.
pub fn run_checks(problem: &Problem, scale: f64, fault: Option<Fault>) -> CliResult<CheckReport> {
    let mut checks = Vec::new();
    let pulse = &problem.initial;

    // per-slice derivatives, every member and slice
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for &offset in problem.ensemble.offsets() {
        let sys = SpinSystem::new(offset)?;
        for &c in pulse.amplitudes() {
            let mut a = slice_derivatives(
                DerivativeMethod::Auxmat,
                &sys,
                c,
                pulse.dt(),
                DerivativeOrder::Second,
            );
            if fault == Some(Fault::AuxmatDerivative) {
                a.first[0][(0, 0)] += C64::new(1e-6, 0.0);
            }
            let e = slice_derivatives(
                DerivativeMethod::Escalade,
                &sys,
                c,
                pulse.dt(),
                DerivativeOrder::Second,
            );
            for j in Direction::ALL {
                first = first.max(max_abs(&(a.first(j) - e.first(j))));
                for k in Direction::ALL {
                    let (sa, se) = (
                        a.second(j, k).expect("second order"),
                        e.second(j, k).expect("second order"),
                    );
                    second = second.max(max_abs(&(sa - se)));
                }
            }
        }
    }
    record(&mut checks, "slice_first_auxmat_vs_escalade", first, 1e-10);
    record(&mut checks, "slice_second_auxmat_vs_escalade", second, 1e-9);

    let eval = |method, mode| {
        ensemble_objective(
            &problem.ensemble,
            pulse,
            &problem.rho0,
            &problem.sigma,
            Want::Hessian,
            method,
            mode,
        )
    };
    let mut reports = Vec::new();
    for method in DerivativeMethod::ALL {
        for mode in [HessianMode::Standard, HessianMode::Accelerated] {
            reports.push(((method, mode), eval(method, mode)?));
        }
    }
    let get = |method, mode| {
        &reports
            .iter()
            .find(|(k, _)| *k == (method, mode))
            .expect("evaluated")
            .1
    };
    let (aux, esc) = (
        get(DerivativeMethod::Auxmat, HessianMode::Accelerated),
        get(DerivativeMethod::Escalade, HessianMode::Accelerated),
    );
    let g = |r: &lvgrape::ObjectiveReport| r.gradient.clone().expect("gradient");
    let h = |r: &lvgrape::ObjectiveReport| r.hessian.clone().expect("hessian");
    record(
        &mut checks,
        "gradient_auxmat_vs_escalade",
        (g(aux) - g(esc)).amax(),
        1e-10,
    );
    for method in DerivativeMethod::ALL {
        let hs = h(get(method, HessianMode::Standard));
        let ha = h(get(method, HessianMode::Accelerated));
        record(
            &mut checks,
            format!("hessian_standard_vs_accelerated_{method}"),
            (&hs - &ha).amax(),
            1e-10,
        );
        record(
            &mut checks,
            format!("hessian_symmetry_standard_{method}"),
            (&hs - hs.transpose()).amax(),
            1e-10,
        );
        record(
            &mut checks,
            format!("hessian_symmetry_accelerated_{method}"),
            (&ha - ha.transpose()).amax(),
            1e-10,
        );
    }

    for method in DerivativeMethod::ALL {
        let p = Problem {
            method,
            hessian_mode: HessianMode::Accelerated,
            ..problem.clone()
        };
        let fd = gradient_check(&p, 1e-4 * scale)?;
        record(
            &mut checks,
            format!("gradient_finite_difference_{method}"),
            fd.max_gradient_error(),
            1e-6,
        );
        record(
            &mut checks,
            format!("hessian_finite_difference_{method}"),
            fd.max_hessian_error(),
            1e-5,
        );
    }
    Ok(CheckReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lvgrape::{named_state, random_pulse, uniform_band, NamedState};

    fn problem(n: usize) -> Problem {
        Problem {
            ensemble: uniform_band(3, 1000.0).unwrap(),
            rho0: named_state(NamedState::Z),
            sigma: named_state(NamedState::X),
            initial: random_pulse(n, 6283.0, 2, 1e-5).unwrap(),
            method: DerivativeMethod::Escalade,
            hessian_mode: HessianMode::Accelerated,
        }
    }

    #[test]
    fn clean_problem_passes() {
        for n in [1, 5] {
            let r = run_checks(&problem(n), 6283.0, None).unwrap();
            assert!(r.passed(), "{:?}", r.checks);
            assert_eq!(r.checks.len(), 13);
        }
    }

    #[test]
    fn injected_fault_is_named() {
        let r = run_checks(&problem(3), 6283.0, Some(Fault::AuxmatDerivative)).unwrap();
        assert_eq!(r.failures(), vec!["slice_first_auxmat_vs_escalade"]);
        assert!(r.checks[0]
            .to_string()
            .starts_with("FAIL slice_first_auxmat_vs_escalade"));
    }
}
