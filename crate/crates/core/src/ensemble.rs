// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Weighted ensembles of resonance offsets.
//!
//! Members are evaluated in parallel; every reduction runs in ascending
//! member order, so results do not depend on the worker count.

use std::f64::consts::PI;

use crate::derivatives::DerivativeMethod;
use crate::error::{Error, Result};
use crate::fidelity::{evaluate, HessianMode, Member, ObjectiveReport};
use crate::spinops::{ControlPulse, StateVector};

pub use crate::fidelity::Want;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl Ensemble {
    /// Offsets in rad/s. Weights must be nonnegative and sum to one.
    pub fn new(offsets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidArgument("ensemble has no members".into()));
        }
        if offsets.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: offsets.len(),
                got: weights.len(),
            });
        }
        if offsets.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble offsets or weights"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("negative ensemble weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "ensemble weights sum to {sum}, expected 1"
            )));
        }
        Ok(Ensemble { offsets, weights })
    }

    /// One member with unit weight.
    pub fn single(offset: f64) -> Result<Self> {
        Ensemble::new(vec![offset], vec![1.0])
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    fn members(&self) -> Vec<Member> {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&offset, &weight)| Member { offset, weight })
            .collect()
    }
}

/// `count` equally spaced offsets with `omega / 2 pi` covering
/// `[-bandwidth_hz / 2, +bandwidth_hz / 2]` inclusive, uniform weights.
pub fn uniform_band(count: usize, bandwidth_hz: f64) -> Result<Ensemble> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "ensemble count must be at least 1".into(),
        ));
    }
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth_hz}"
        )));
    }
    let offsets = if count == 1 {
        vec![0.0]
    } else {
        let half = bandwidth_hz / 2.0;
        let step = bandwidth_hz / (count - 1) as f64;
        (0..count)
            .map(|i| 2.0 * PI * (-half + step * i as f64))
            .collect()
    };
    let weights = vec![1.0 / count as f64; count];
    // 1/count summed count times is within a few ulp of one
    Ok(Ensemble { offsets, weights })
}

/// Weighted sum of the member objectives.
pub fn ensemble_objective(
    ens: &Ensemble,
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
    want: Want,
    method: DerivativeMethod,
    mode: HessianMode,
) -> Result<ObjectiveReport> {
    evaluate(&ens.members(), pulse, rho0, sigma, method, want, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{fidelity, objective};
    use crate::spinops::{named_state, random_pulse, NamedState, SpinSystem};

    #[test]
    fn band_of_101_over_one_kilohertz() {
        let e = uniform_band(101, 1000.0).unwrap();
        assert_eq!(e.len(), 101);
        for (i, w) in e.offsets().iter().enumerate() {
            let hz = w / (2.0 * PI);
            assert!((hz - (-500.0 + 10.0 * i as f64)).abs() < 1e-9, "{i}: {hz}");
        }
        assert!(e.weights().iter().all(|&w| w == 1.0 / 101.0));
        assert!((e.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn small_bands() {
        assert_eq!(uniform_band(1, 123.0).unwrap().offsets(), &[0.0]);
        assert_eq!(uniform_band(1, 123.0).unwrap().weights(), &[1.0]);
        let e = uniform_band(3, 100.0).unwrap();
        let hz: Vec<f64> = e.offsets().iter().map(|w| w / (2.0 * PI)).collect();
        assert!((hz[0] + 50.0).abs() < 1e-12 && hz[1] == 0.0 && (hz[2] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_ensembles() {
        assert!(uniform_band(0, 1.0).is_err());
        assert!(uniform_band(3, 0.0).is_err());
        assert!(Ensemble::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Ensemble::new(vec![0.0, 1.0], vec![0.7, 0.7]).is_err());
        assert!(Ensemble::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(Ensemble::new(vec![], vec![]).is_err());
    }

    #[test]
    fn two_members_average() {
        let pulse = random_pulse(8, 2.0 * PI * 500.0, 5, 1e-5).unwrap();
        let z = named_state(NamedState::Z);
        let x = named_state(NamedState::X);
        let (a, b) = (2.0 * PI * 100.0, -2.0 * PI * 300.0);
        let fa = fidelity(&SpinSystem::new(a).unwrap(), &pulse, &z, &x).unwrap();
        let fb = fidelity(&SpinSystem::new(b).unwrap(), &pulse, &z, &x).unwrap();
        let ens = Ensemble::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let r = ensemble_objective(
            &ens,
            &pulse,
            &z,
            &x,
            Want::Fidelity,
            DerivativeMethod::Escalade,
            HessianMode::Accelerated,
        )
        .unwrap();
        assert!((r.fidelity - (fa + fb) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_member_matches_single_system() {
        let pulse = random_pulse(10, 2.0 * PI * 800.0, 6, 2e-5).unwrap();
        let z = named_state(NamedState::Z);
        let y = named_state(NamedState::Y);
        let off = 2.0 * PI * 42.0;
        let ens = Ensemble::single(off).unwrap();
        let sys = SpinSystem::new(off).unwrap();
        for method in DerivativeMethod::ALL {
            let a = ensemble_objective(
                &ens,
                &pulse,
                &z,
                &y,
                Want::Hessian,
                method,
                HessianMode::Accelerated,
            )
            .unwrap();
            let b = objective(
                &sys,
                &pulse,
                &z,
                &y,
                method,
                Want::Hessian,
                HessianMode::Accelerated,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }
}
