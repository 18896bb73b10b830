// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Newton-Raphson ascent on the ensemble fidelity.
//!
//! Each iteration evaluates fidelity, gradient and Hessian in one sweep,
//! regularizes the Hessian so that the step is an ascent direction, clips the
//! step and runs a backtracking Armijo line search on the fidelity.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::derivatives::DerivativeMethod;
use crate::ensemble::{ensemble_objective, Ensemble, Want};
use crate::error::{Error, Result};
use crate::fidelity::{HessianMode, ObjectiveReport};
use crate::spinops::{ControlPulse, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularization {
    /// Eigendecompose and make every eigenvalue at most `-eps`.
    EigenShift,
    /// Rational-function (augmented Hessian) step.
    RationalFunction,
}

impl Regularization {
    pub fn name(self) -> &'static str {
        match self {
            Regularization::EigenShift => "eigen_shift",
            Regularization::RationalFunction => "rational_function",
        }
    }
}

impl fmt::Display for Regularization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regularization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen_shift" => Ok(Regularization::EigenShift),
            "rational_function" => Ok(Regularization::RationalFunction),
            other => Err(Error::InvalidArgument(format!(
                "unknown regularization `{other}` (expected eigen_shift or rational_function)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop when the gradient infinity norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the fidelity reaches this.
    pub fidelity_target: f64,
    pub regularization: Regularization,
    /// Largest allowed step infinity norm, rad/s.
    pub max_step: f64,
    /// Sufficient-increase constant of the line search.
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// `false` replaces the Newton step by the (clipped) gradient.
    pub use_hessian: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 100,
            gradient_tolerance: 1e-12,
            fidelity_target: 1.0 - 1e-9,
            regularization: Regularization::EigenShift,
            max_step: 2.0 * std::f64::consts::PI * 5000.0,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            use_hessian: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.gradient_tolerance) {
            return Err(Error::InvalidArgument(
                "gradient_tolerance must be positive".into(),
            ));
        }
        if !self.fidelity_target.is_finite() {
            return Err(Error::InvalidArgument(
                "fidelity_target must be finite".into(),
            ));
        }
        if !positive(self.max_step) {
            return Err(Error::InvalidArgument("max_step must be positive".into()));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::InvalidArgument(
                "armijo_c1 must lie in (0, 1)".into(),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument(
                "backtrack_factor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// An optimal-control problem over an offset ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub ensemble: Ensemble,
    pub rho0: StateVector,
    pub sigma: StateVector,
    pub initial: ControlPulse,
    pub method: DerivativeMethod,
    pub hessian_mode: HessianMode,
}

impl Problem {
    pub fn evaluate(&self, pulse: &ControlPulse, want: Want) -> Result<ObjectiveReport> {
        ensemble_objective(
            &self.ensemble,
            pulse,
            &self.rho0,
            &self.sigma,
            want,
            self.method,
            self.hessian_mode,
        )
    }
}

/// State at the start of one iteration and the step taken from it.
/// Timings are wall-clock seconds; fidelity, gradient and Hessian come from
/// one shared sweep and are timed together.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub fidelity: f64,
    pub gradient_norm: f64,
    /// Accepted step infinity norm (zero when no step was taken).
    pub step_norm: f64,
    /// Smallest Hessian eigenvalue (NaN when the Hessian was not used).
    pub min_eigenvalue: f64,
    pub backtracks: usize,
    pub time_objective: f64,
    pub time_solve: f64,
    pub time_line_search: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    FidelityTarget,
    MaxIterations,
    LineSearchFailed,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::FidelityTarget => "fidelity_target",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchFailed => "line_search_failed",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pulse: ControlPulse,
    pub fidelity: f64,
    pub trace: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl Outcome {
    pub fn accepted_steps(&self) -> usize {
        self.trace.iter().filter(|r| r.step_norm > 0.0).count()
    }
}

/// Regularized ascent step plus the smallest Hessian eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub step: DVector<f64>,
    pub min_eigenvalue: f64,
}

/// Regularized Newton step for maximization, clipped to `cfg.max_step`.
pub fn newton_step(
    grad: &DVector<f64>,
    hess: &DMatrix<f64>,
    cfg: &OptimizerConfig,
) -> Result<NewtonStep> {
    let n = grad.len();
    if hess.nrows() != n || hess.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: hess.nrows(),
        });
    }
    let scale = hess.amax();
    let asym = (hess - hess.transpose()).amax();
    if asym > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (hess + hess.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min_eigenvalue = eig.eigenvalues.min();
    let step = match cfg.regularization {
        Regularization::EigenShift => eigen_shift_step(grad, &eig),
        Regularization::RationalFunction => {
            rfo_step(grad, hess).unwrap_or_else(|| eigen_shift_step(grad, &eig))
        }
    };
    Ok(NewtonStep {
        step: clip(step, cfg.max_step),
        min_eigenvalue,
    })
}

fn eigen_shift_step(grad: &DVector<f64>, eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DVector<f64> {
    let largest = eig.eigenvalues.amax();
    let eps = if largest > 0.0 { 1e-6 * largest } else { 1.0 };
    // H~ = V diag(l~) V^T with l~ = -max(|l|, eps); s = -H~^{-1} g
    let mut coeffs = eig.eigenvectors.tr_mul(grad);
    for (c, &l) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c /= l.abs().max(eps);
    }
    &eig.eigenvectors * coeffs
}

/// Lowest eigenpair of the augmented Hessian of `-F`.
fn rfo_step(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-hess));
    aug.view_mut((0, n), (n, 1)).copy_from(&(-grad));
    aug.view_mut((n, 0), (1, n)).copy_from(&(-grad.transpose()));
    let eig = SymmetricEigen::new(aug);
    let low = eig.eigenvalues.imin();
    let v = eig.eigenvectors.column(low);
    let last = v[n];
    if last.abs() < 1e-12 * v.amax() {
        return None;
    }
    let step = v.rows(0, n) / last;
    (step.dot(grad) > 0.0).then_some(step)
}

fn clip(step: DVector<f64>, max_step: f64) -> DVector<f64> {
    let norm = step.amax();
    if norm > max_step {
        step * (max_step / norm)
    } else {
        step
    }
}

fn shifted(pulse: &ControlPulse, step: &DVector<f64>, alpha: f64) -> Result<ControlPulse> {
    let mut flat = pulse.to_flat();
    for (c, s) in flat.iter_mut().zip(step.iter()) {
        *c += alpha * s;
    }
    ControlPulse::from_flat(&flat, pulse.dt())
}

/// Runs the optimization from `problem.initial`.
pub fn optimize(problem: &Problem, cfg: &OptimizerConfig) -> Result<Outcome> {
    cfg.validate()?;
    let mut pulse = problem.initial.clone();
    let mut trace = Vec::new();
    let want = if cfg.use_hessian {
        Want::Hessian
    } else {
        Want::Gradient
    };

    let mut iteration = 0;
    let (fidelity, stop) = loop {
        let t0 = Instant::now();
        let report = problem.evaluate(&pulse, want)?;
        let time_objective = t0.elapsed().as_secs_f64();
        let f = report.fidelity;
        let grad = report.gradient.expect("gradient requested");
        let mut record = IterationRecord {
            iteration,
            fidelity: f,
            gradient_norm: grad.amax(),
            step_norm: 0.0,
            min_eigenvalue: f64::NAN,
            backtracks: 0,
            time_objective,
            time_solve: 0.0,
            time_line_search: 0.0,
        };
        let stop = if record.gradient_norm < cfg.gradient_tolerance {
            Some(StopReason::GradientTolerance)
        } else if f >= cfg.fidelity_target {
            Some(StopReason::FidelityTarget)
        } else if iteration >= cfg.max_iterations {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop) = stop {
            trace.push(record);
            break (f, stop);
        }

        let t1 = Instant::now();
        let step = match report.hessian {
            Some(h) => {
                let s = newton_step(&grad, &h, cfg)?;
                record.min_eigenvalue = s.min_eigenvalue;
                s.step
            }
            None => clip(
                grad.clone() * (cfg.max_step / record.gradient_norm),
                cfg.max_step,
            ),
        };
        record.time_solve = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = None;
        for b in 0..=cfg.max_backtracks {
            let trial = shifted(&pulse, &step, alpha)?;
            let ft = problem.evaluate(&trial, Want::Fidelity)?.fidelity;
            if ft >= f + cfg.armijo_c1 * alpha * slope && ft >= f {
                accepted = Some((trial, b));
                break;
            }
            alpha *= cfg.backtrack_factor;
        }
        record.time_line_search = t2.elapsed().as_secs_f64();
        match accepted {
            Some((trial, b)) => {
                record.step_norm = alpha * step.amax();
                record.backtracks = b;
                trace.push(record);
                pulse = trial;
                iteration += 1;
            }
            None => {
                record.backtracks = cfg.max_backtracks;
                trace.push(record);
                break (f, StopReason::LineSearchFailed);
            }
        }
    };
    Ok(Outcome {
        pulse,
        fidelity,
        trace,
        stop,
    })
}

/// Maximum errors of the analytic derivatives against central differences,
/// relative to the largest analytic entry of the same channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub gradient: [f64; 3],
    /// Rows of channel `k` against differences of the analytic gradient.
    pub hessian: [f64; 3],
}

impl GradientCheck {
    pub fn max_gradient_error(&self) -> f64 {
        self.gradient.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hessian_error(&self) -> f64 {
        self.hessian.iter().copied().fold(0.0, f64::max)
    }
}

/// Compares the analytic gradient and Hessian at `problem.initial` with
/// central differences of step `h` (rad/s).
pub fn gradient_check(problem: &Problem, h: f64) -> Result<GradientCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "difference step must be positive, got {h}"
        )));
    }
    let pulse = &problem.initial;
    let report = problem.evaluate(pulse, Want::Hessian)?;
    let grad = report.gradient.expect("gradient requested");
    let hess = report.hessian.expect("hessian requested");
    let n = grad.len();
    let mut fd_grad = DVector::zeros(n);
    let mut fd_hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let plus = shifted(pulse, &e, h)?;
        let minus = shifted(pulse, &e, -h)?;
        let fp = problem.evaluate(&plus, Want::Gradient)?;
        let fm = problem.evaluate(&minus, Want::Gradient)?;
        fd_grad[i] = (fp.fidelity - fm.fidelity) / (2.0 * h);
        let column = (fp.gradient.expect("gradient") - fm.gradient.expect("gradient")) / (2.0 * h);
        fd_hess.set_column(i, &column);
    }
    let mut out = GradientCheck {
        gradient: [0.0; 3],
        hessian: [0.0; 3],
    };
    for k in 0..3 {
        let rows = (k..n).step_by(3);
        let g_scale = rows.clone().map(|r| grad[r].abs()).fold(0.0, f64::max);
        let g_err = rows
            .clone()
            .map(|r| (grad[r] - fd_grad[r]).abs())
            .fold(0.0, f64::max);
        out.gradient[k] = relative(g_err, g_scale);
        let h_scale = rows.clone().map(|r| hess.row(r).amax()).fold(0.0, f64::max);
        let h_err = rows
            .map(|r| (hess.row(r) - fd_hess.row(r)).amax())
            .fold(0.0, f64::max);
        out.hessian[k] = relative(h_err, h_scale);
    }
    Ok(out)
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::{named_state, random_pulse, NamedState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    #[test]
    fn negative_identity_gives_gradient() {
        let g = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let s = newton_step(&g, &(-DMatrix::identity(3, 3)), &OptimizerConfig::default()).unwrap();
        assert!((s.step - &g).amax() < 1e-15);
        assert_eq!(s.min_eigenvalue, -1.0);
    }

    #[test]
    fn quadratic_is_solved_in_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let h = -(&a * a.transpose() + DMatrix::identity(6, 6));
        let x_star = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        // F(x) = 1/2 (x - x*)^T H (x - x*), evaluated at zero
        let g = -(&h * &x_star);
        let s = newton_step(&g, &h, &OptimizerConfig::default()).unwrap();
        assert!((s.step - x_star).amax() <= 1e-10);
    }

    #[test]
    fn indefinite_hessians_give_ascent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for reg in [Regularization::EigenShift, Regularization::RationalFunction] {
            let cfg = OptimizerConfig {
                regularization: reg,
                ..OptimizerConfig::default()
            };
            let mut seen_positive = 0;
            for _ in 0..200 {
                let h = random_symmetric(&mut rng, 6);
                let g = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
                let s = newton_step(&g, &h, &cfg).unwrap();
                if s.min_eigenvalue < 0.0 && SymmetricEigen::new(h).eigenvalues.max() > 0.0 {
                    seen_positive += 1;
                }
                assert!(g.dot(&s.step) > 0.0, "{reg}");
            }
            assert!(seen_positive > 100);
        }
    }

    #[test]
    fn step_is_clipped() {
        let g = DVector::from_vec(vec![1e6, 1.0]);
        let cfg = OptimizerConfig {
            max_step: 10.0,
            ..OptimizerConfig::default()
        };
        let s = newton_step(&g, &(-DMatrix::identity(2, 2)), &cfg).unwrap();
        assert!((s.step.amax() - 10.0).abs() < 1e-12);
        assert!((s.step[1] - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn asymmetric_hessian_is_rejected() {
        let mut h = -DMatrix::identity(2, 2);
        h[(0, 1)] = 0.5;
        let g = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            newton_step(&g, &h, &OptimizerConfig::default()),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = OptimizerConfig {
            backtrack_factor: 1.0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            gradient_tolerance: 0.0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }

    fn single_problem(initial: ControlPulse) -> Problem {
        Problem {
            ensemble: Ensemble::single(0.0).unwrap(),
            rho0: named_state(NamedState::Z),
            sigma: named_state(NamedState::X),
            initial,
            method: DerivativeMethod::Escalade,
            hessian_mode: HessianMode::Accelerated,
        }
    }

    #[test]
    fn converged_start_returns_immediately() {
        // z stays z under a zero pulse, which is a stationary point of z -> z
        let mut p = single_problem(ControlPulse::zeros(4, 1e-5).unwrap());
        p.sigma = named_state(NamedState::Z);
        let out = optimize(&p, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.accepted_steps(), 0);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.stop, StopReason::GradientTolerance);
    }

    #[test]
    fn single_system_transfer_converges() {
        let n = 32;
        let initial = random_pulse(n, 2.0 * PI * 100.0, 7, 1e-3 / n as f64).unwrap();
        let out = optimize(&single_problem(initial), &OptimizerConfig::default()).unwrap();
        assert!(
            out.fidelity >= 1.0 - 1e-6,
            "{} after {:?}",
            out.fidelity,
            out.stop
        );
        for w in out.trace.windows(2) {
            assert!(w[1].fidelity >= w[0].fidelity);
        }
    }

    #[test]
    fn newton_tail_is_superlinear() {
        let n = 32;
        let initial = random_pulse(n, 2.0 * PI * 1000.0, 1, 1e-3 / n as f64).unwrap();
        let cfg = OptimizerConfig {
            fidelity_target: 2.0,
            gradient_tolerance: 1e-13,
            ..OptimizerConfig::default()
        };
        let out = optimize(&single_problem(initial), &cfg).unwrap();
        let g: Vec<f64> = out.trace.iter().map(|r| r.gradient_norm).collect();
        let k = g.len();
        assert!(k >= 4, "{g:?}");
        // |g_{i+1}| <= c |g_i|^1.5 over the final three steps, with one c
        let (g0, g1, g2, g3) = (g[k - 4], g[k - 3], g[k - 2], g[k - 1]);
        let order = |a: f64, b: f64, c: f64| (c / b).ln() / (b / a).ln();
        assert!(order(g0, g1, g2) >= 1.5, "{g:?}");
        assert!(order(g1, g2, g3) >= 1.5, "{g:?}");
    }

    #[test]
    fn gradient_only_fallback_ascends() {
        let n = 8;
        let initial = random_pulse(n, 2.0 * PI * 200.0, 8, 1e-4).unwrap();
        let cfg = OptimizerConfig {
            use_hessian: false,
            max_iterations: 5,
            ..OptimizerConfig::default()
        };
        let out = optimize(&single_problem(initial), &cfg).unwrap();
        assert!(out.fidelity > out.trace[0].fidelity);
        assert!(out.trace.iter().all(|r| r.min_eigenvalue.is_nan()));
    }

    #[test]
    fn finite_difference_check() {
        let scale = 2.0 * PI * 1000.0;
        let initial = random_pulse(5, scale, 9, 2e-5).unwrap();
        let mut p = single_problem(initial);
        p.ensemble = crate::ensemble::uniform_band(3, 400.0).unwrap();
        let fine = gradient_check(&p, 1e-4 * scale).unwrap();
        assert!(fine.max_gradient_error() <= 1e-6, "{fine:?}");
        assert!(fine.max_hessian_error() <= 1e-6, "{fine:?}");
        let coarse = gradient_check(&p, 1e-1 * scale).unwrap();
        let coarser = gradient_check(&p, 2e-1 * scale).unwrap();
        // truncation error is second order in h
        let ratio = coarser.max_gradient_error() / coarse.max_gradient_error();
        assert!((3.0..5.0).contains(&ratio), "{ratio}");
        assert!(gradient_check(&p, 0.0).is_err());
    }

    #[test]
    fn single_slice_check() {
        let initial = random_pulse(1, 2.0 * PI * 500.0, 10, 5e-5).unwrap();
        let r = gradient_check(&single_problem(initial), 1.0).unwrap();
        assert!(r.max_hessian_error() < 1e-6, "{r:?}");
    }
}
