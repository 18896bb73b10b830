// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Slice propagators, state trajectories and effective propagators.
//!
//! A slice propagator is `P_n = exp(-i L_n dt)` with
//! `L_n = x Lx + y Ly + z Lz`, `z = c_z + offset`. The closed form used here
//! is the spin-1 Wigner matrix of the Cayley-Klein pair
//!
//! ```text
//! alpha = cos(phi) - i (z/r) sin(phi)
//! beta  = -(y + i x) sin(phi) / r,        phi = r dt / 2
//! ```
//!
//! These signs (conjugated `alpha`, negated `beta` relative to the usual
//! spectroscopy form) are the ones for which the Wigner matrix equals the
//! matrix exponential under [`standard_generators`]; the unit tests pin this
//! against [`expm`].
//!
//! [`standard_generators`]: crate::spinops::standard_generators

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::spinops::{ControlPulse, SpinSystem, StateVector};
use crate::{CMat3, CVec3, C64};

/// Below this rotation angle `sin(phi)/phi` is evaluated by its series.
pub(crate) const SMALL_PHI: f64 = 0.1;

#[inline]
pub(crate) fn sinc(phi: f64) -> f64 {
    if phi.abs() < SMALL_PHI {
        let p2 = phi * phi;
        1.0 - p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0 * (1.0 - p2 / 72.0)))
    } else {
        phi.sin() / phi
    }
}

/// Single-slice propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator(pub CMat3);

impl Propagator {
    pub fn identity() -> Self {
        Self(CMat3::identity())
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn apply(&self, s: &StateVector) -> StateVector {
        // unitary action keeps finite input finite
        StateVector::new(self.0 * s.coeffs()).expect("finite state")
    }

    /// `max |P^dagger P - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.0.adjoint() * self.0 - CMat3::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Rotation parameters of one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerFactors {
    pub x: f64,
    pub y: f64,
    /// Includes the resonance offset.
    pub z: f64,
    pub r: f64,
    pub phi: f64,
    pub alpha: C64,
    pub beta: C64,
}

pub fn wigner_factors(cx: f64, cy: f64, cz: f64, offset: f64, dt: f64) -> WignerFactors {
    let (x, y, z) = (cx, cy, cz + offset);
    let r = (x * x + y * y + z * z).sqrt();
    let phi = 0.5 * r * dt;
    // sin(phi)/r written as (dt/2) sinc(phi) so that r = 0 needs no branch
    let sr = 0.5 * dt * sinc(phi);
    WignerFactors {
        x,
        y,
        z,
        r,
        phi,
        alpha: C64::new(phi.cos(), -z * sr),
        beta: C64::new(-y * sr, -x * sr),
    }
}

pub fn wigner_propagator(f: &WignerFactors) -> Propagator {
    let (a, b) = (f.alpha, f.beta);
    let (ac, bc) = (a.conj(), b.conj());
    let s2 = C64::from(std::f64::consts::SQRT_2);
    Propagator(CMat3::new(
        a * a,
        s2 * a * b,
        b * b,
        -s2 * a * bc,
        a * ac - b * bc,
        s2 * ac * b,
        bc * bc,
        -s2 * ac * bc,
        ac * ac,
    ))
}

/// Propagator of slice `controls` through the Wigner closed form.
pub fn slice_propagator(sys: &SpinSystem, controls: [f64; 3], dt: f64) -> Propagator {
    wigner_propagator(&wigner_factors(
        controls[0],
        controls[1],
        controls[2],
        sys.offset(),
        dt,
    ))
}

/// Same propagator through the dense exponential of `-i L_n dt`.
pub fn exponential_propagator(sys: &SpinSystem, controls: [f64; 3], dt: f64) -> Result<Propagator> {
    let a = sys.liouvillian(controls) * C64::new(0.0, -dt);
    Ok(Propagator(expm(&a)?))
}

pub fn slice_propagators(sys: &SpinSystem, pulse: &ControlPulse) -> Vec<Propagator> {
    pulse
        .amplitudes()
        .iter()
        .map(|&c| slice_propagator(sys, c, pulse.dt()))
        .collect()
}

/// Ordered states indexed by time point.
///
/// A forward trajectory covers time points `0..=N` (`rho_0 .. rho_N`); a
/// backward (adjoint) trajectory covers `1..=N+1` (`chi_1 .. chi_{N+1}`,
/// with `chi_{N+1}` the target).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    first: usize,
    columns: Vec<CVec3>,
}

impl TrajectoryMatrix {
    /// Inclusive time-point range `(m, n)`.
    pub fn range(&self) -> (usize, usize) {
        (self.first, self.first + self.columns.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// State at time point `t`.
    pub fn at(&self, t: usize) -> &CVec3 {
        &self.columns[t - self.first]
    }

    pub fn columns(&self) -> &[CVec3] {
        &self.columns
    }
}

/// `rho_n = P_n rho_{n-1}` for `n = 1..=N`.
pub fn forward_trajectory(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
) -> TrajectoryMatrix {
    let mut columns = Vec::with_capacity(pulse.len() + 1);
    let mut rho = *rho0.coeffs();
    columns.push(rho);
    for &c in pulse.amplitudes() {
        rho = slice_propagator(sys, c, pulse.dt()).0 * rho;
        columns.push(rho);
    }
    TrajectoryMatrix { first: 0, columns }
}

/// `chi_n = P_n^dagger chi_{n+1}` for `n = N..=1`, with `chi_{N+1} = sigma`.
pub fn backward_trajectory(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    sigma: &StateVector,
) -> TrajectoryMatrix {
    let n = pulse.len();
    let mut columns = vec![CVec3::zeros(); n + 1];
    let mut chi = *sigma.coeffs();
    columns[n] = chi;
    for (i, &c) in pulse.amplitudes().iter().enumerate().rev() {
        chi = slice_propagator(sys, c, pulse.dt()).0.ad_mul(&chi);
        columns[i] = chi;
    }
    TrajectoryMatrix { first: 1, columns }
}

/// `U_m^n = P_n ... P_m` for `1 <= m <= n <= N` (one-based slice indices).
/// A reversed range `m > n` returns the time-reversed propagator
/// `U_m^n = (U_n^m)^dagger`.
pub fn effective_propagator(props: &[Propagator], m: usize, n: usize) -> Result<Propagator> {
    let len = props.len();
    if m == 0 || n == 0 || m > len || n > len {
        return Err(Error::IndexOutOfRange { m, n, len });
    }
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let u = props[lo - 1..hi]
        .iter()
        .fold(CMat3::identity(), |acc, p| p.0 * acc);
    Ok(if m <= n {
        Propagator(u)
    } else {
        Propagator(u.adjoint())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinops::{named_state, random_pulse, NamedState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn max_abs(m: &CMat3) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_field_factors() {
        let f = wigner_factors(0.0, 0.0, 0.0, 0.0, 1e-5);
        assert_eq!(f.alpha, C64::from(1.0));
        assert_eq!(f.beta, C64::from(0.0));
        assert_eq!(f.r, 0.0);
        assert_eq!(wigner_propagator(&f), Propagator::identity());
    }

    #[test]
    fn pure_offset_factors() {
        let off = 2.0 * PI * 500.0;
        let f = wigner_factors(0.0, 0.0, 0.0, off, 1e-5);
        assert!((f.r - off).abs() <= 1e-12);
        assert!((f.phi - PI * 500.0 * 1e-5).abs() <= 1e-15);
        assert!((f.alpha.norm() - 1.0).abs() <= 1e-15);
        assert_eq!(f.beta, C64::from(0.0));
        let p = wigner_propagator(&f);
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    assert_eq!(p.0[(r, c)], C64::from(0.0));
                }
            }
        }
        assert!((p.0[(0, 0)].norm() - 1.0).abs() <= 1e-15);
        assert!((p.0[(2, 2)].norm() - 1.0).abs() <= 1e-15);
        assert_eq!(p.0[(1, 1)], C64::from(1.0));
        let sys = SpinSystem::new(off).unwrap();
        let e = exponential_propagator(&sys, [0.0; 3], 1e-5).unwrap();
        assert!(max_abs(&(e.0 - p.0)) <= 1e-14);
    }

    #[test]
    fn cayley_klein_norm() {
        let f = wigner_factors(2.0 * PI * 1000.0, 0.0, 0.0, 0.0, 7.8125e-6);
        assert!((f.alpha.norm_sqr() + f.beta.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn wigner_matches_exponential_at_fixed_point() {
        let (x, y, z) = (2.0 * PI * 300.0, -2.0 * PI * 400.0, 2.0 * PI * 120.0);
        let sys = SpinSystem::new(0.0).unwrap();
        let w = wigner_propagator(&wigner_factors(x, y, z, 0.0, 1e-5));
        let e = exponential_propagator(&sys, [x, y, z], 1e-5).unwrap();
        assert!(max_abs(&(w.0 - e.0)) <= 1e-12);
    }

    #[test]
    fn wigner_matches_exponential_over_many_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dt = 1e-4;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            // r dt spans [0, 4 pi]
            let r = rng.random_range(0.0..4.0 * PI / dt);
            let mut v = [
                rng.random_range(-1.0..1.0f64),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.iter_mut().for_each(|c| *c *= r / nv);
            let off = rng.random_range(-1000.0..1000.0);
            let sys = SpinSystem::new(off).unwrap();
            let w = wigner_propagator(&wigner_factors(v[0], v[1], v[2] - off, off, dt));
            let e = exponential_propagator(&sys, [v[0], v[1], v[2] - off], dt).unwrap();
            worst = worst.max(max_abs(&(w.0 - e.0)));
            assert!(w.unitarity_defect() <= 1e-12);
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn continuity_near_zero_field() {
        let p = wigner_propagator(&wigner_factors(1e-12, 0.0, 0.0, 0.0, 1e-5));
        assert!(max_abs(&(p.0 - CMat3::identity())) <= 1e-10);
        assert!(p.0.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn zero_pulse_trajectories_are_constant() {
        let sys = SpinSystem::on_resonance();
        let pulse = ControlPulse::zeros(5, 1e-5).unwrap();
        let rho0 = named_state(NamedState::X);
        let sigma = named_state(NamedState::Y);
        let fwd = forward_trajectory(&sys, &pulse, &rho0);
        assert_eq!(fwd.range(), (0, 5));
        assert!(fwd.columns().iter().all(|c| c == rho0.coeffs()));
        let bwd = backward_trajectory(&sys, &pulse, &sigma);
        assert_eq!(bwd.range(), (1, 6));
        assert!(bwd.columns().iter().all(|c| c == sigma.coeffs()));
    }

    #[test]
    fn trajectories_match_explicit_products() {
        let sys = SpinSystem::new(2.0 * PI * 150.0).unwrap();
        let pulse = random_pulse(3, 2.0 * PI * 1000.0, 9, 5e-5).unwrap();
        let rho0 = named_state(NamedState::Z);
        let sigma = named_state(NamedState::X);
        let props = slice_propagators(&sys, &pulse);
        let fwd = forward_trajectory(&sys, &pulse, &rho0);
        let full = props[2].0 * props[1].0 * props[0].0;
        assert!((fwd.at(3) - full * rho0.coeffs()).norm() <= 1e-14);
        for t in 0..=3 {
            assert!((fwd.at(t).norm() - 1.0).abs() <= 1e-10);
        }
        let bwd = backward_trajectory(&sys, &pulse, &sigma);
        let direct = sigma.coeffs().dotc(&(full * rho0.coeffs()));
        assert!((bwd.at(1).dotc(rho0.coeffs()) - direct).norm() <= 1e-12);
        // <chi_{n+1}|rho_n> is conserved along the pulse
        for n in 0..=3 {
            assert!((bwd.at(n + 1).dotc(fwd.at(n)) - direct).norm() <= 1e-10);
        }
    }

    #[test]
    fn single_slice_adjoint_state() {
        let sys = SpinSystem::on_resonance();
        let pulse = random_pulse(1, 5000.0, 4, 1e-4).unwrap();
        let sigma = named_state(NamedState::Y);
        let p = slice_propagator(&sys, pulse.slice(0), 1e-4);
        let bwd = backward_trajectory(&sys, &pulse, &sigma);
        assert!((bwd.at(1) - p.0.adjoint() * sigma.coeffs()).norm() <= 1e-15);
    }

    #[test]
    fn effective_propagator_identities() {
        let sys = SpinSystem::new(-900.0).unwrap();
        let pulse = random_pulse(6, 2.0 * PI * 1000.0, 21, 1e-4).unwrap();
        let props = slice_propagators(&sys, &pulse);
        let n = props.len();
        assert_eq!(effective_propagator(&props, 4, 4).unwrap(), props[3]);
        let total = effective_propagator(&props, 1, n).unwrap();
        assert!(max_abs(&(total.0 * total.0.adjoint() - CMat3::identity())) <= 1e-12);
        let rev = effective_propagator(&props, n, 1).unwrap();
        assert!(max_abs(&(rev.0 - total.0.adjoint())) <= 1e-15);
        // splitting of the central propagator
        for big in 3..=n {
            let left = effective_propagator(&props, 1, big - 1).unwrap();
            for m in 1..big - 1 {
                let central = effective_propagator(&props, m + 1, big - 1).unwrap();
                let head = effective_propagator(&props, 1, m).unwrap();
                assert!(max_abs(&(central.0 * head.0 - left.0)) <= 1e-12);
            }
        }
        assert!(matches!(
            effective_propagator(&props, 0, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(effective_propagator(&props, 1, n + 1).is_err());
    }
}
