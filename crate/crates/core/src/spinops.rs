// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Spherical-tensor basis, control generators, pulses and named states.
//!
//! The identity component of the four-dimensional Liouville space of a
//! spin-1/2 is invariant under the dynamics and is dropped, so states are the
//! three rank-1 coefficients in the order `(T_{1,+1}, T_{1,0}, T_{1,-1})`.
//! With that ordering `Lz = diag(1, 0, -1)` and `Lx`, `Ly` are the spin-1
//! matrices with Condon-Shortley phases.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::{CMat3, CVec3, C64};

/// Control channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    X,
    Y,
    Z,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::X, Direction::Y, Direction::Z];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i]
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::X => "x",
            Direction::Y => "y",
            Direction::Z => "z",
        })
    }
}

/// Liouville-space generators of rotations about `x`, `y` and `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generators {
    pub lx: CMat3,
    pub ly: CMat3,
    pub lz: CMat3,
}

impl Generators {
    pub fn get(&self, d: Direction) -> &CMat3 {
        match d {
            Direction::X => &self.lx,
            Direction::Y => &self.ly,
            Direction::Z => &self.lz,
        }
    }

    /// `x Lx + y Ly + z Lz`.
    pub fn combine(&self, x: f64, y: f64, z: f64) -> CMat3 {
        self.lx * C64::from(x) + self.ly * C64::from(y) + self.lz * C64::from(z)
    }
}

/// Spin-1 representation of the rotation generators in the rank-1 basis.
pub fn standard_generators() -> Generators {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let o = C64::new(0.0, 0.0);
    let re = C64::new(s, 0.0);
    let im = C64::new(0.0, s);
    Generators {
        lx: CMat3::new(o, re, o, re, o, re, o, re, o),
        ly: CMat3::new(o, -im, o, im, o, -im, o, im, o),
        lz: CMat3::new(C64::new(1.0, 0.0), o, o, o, o, o, o, o, C64::new(-1.0, 0.0)),
    }
}

/// A single spin-1/2 with a resonance offset (rad/s), which enters the
/// Liouvillian as the drift term `offset * Lz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystem {
    offset: f64,
    generators: Generators,
}

impl SpinSystem {
    pub fn new(offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFinite("resonance offset"));
        }
        Ok(Self {
            offset,
            generators: standard_generators(),
        })
    }

    pub fn on_resonance() -> Self {
        Self {
            offset: 0.0,
            generators: standard_generators(),
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn generators(&self) -> &Generators {
        &self.generators
    }

    /// Total Liouvillian of a slice with the given control amplitudes.
    pub fn liouvillian(&self, controls: [f64; 3]) -> CMat3 {
        self.generators
            .combine(controls[0], controls[1], controls[2] + self.offset)
    }
}

/// Piecewise-constant control amplitudes in rad/s, one `[cx, cy, cz]` row per
/// time slice of width `dt` seconds.
///
/// Flat parameter vectors (gradients, Hessian rows) use slice-major order:
/// entry `3 * n + k` belongs to slice `n` and channel `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    amplitudes: Vec<[f64; 3]>,
    dt: f64,
}

impl ControlPulse {
    pub fn new(amplitudes: Vec<[f64; 3]>, dt: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument(
                "a pulse needs at least one slice".into(),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "slice width must be positive and finite, got {dt}"
            )));
        }
        if amplitudes.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("control amplitudes"));
        }
        Ok(Self { amplitudes, dt })
    }

    pub fn zeros(slices: usize, dt: f64) -> Result<Self> {
        Self::new(vec![[0.0; 3]; slices], dt)
    }

    /// Builds a pulse from a slice-major flat vector of length `3 * N`.
    pub fn from_flat(params: &[f64], dt: f64) -> Result<Self> {
        if params.len() % 3 != 0 {
            return Err(Error::InvalidArgument(format!(
                "flat parameter length {} is not a multiple of 3",
                params.len()
            )));
        }
        let rows = params.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(rows, dt)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.amplitudes.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.amplitudes.len() as f64
    }

    pub fn amplitudes(&self) -> &[[f64; 3]] {
        &self.amplitudes
    }

    pub fn slice(&self, n: usize) -> [f64; 3] {
        self.amplitudes[n]
    }
}

/// Coefficients of a Liouville-space state in the rank-1 tensor basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(CVec3);

impl StateVector {
    pub fn new(coeffs: CVec3) -> Result<Self> {
        if coeffs
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(Self(coeffs))
    }

    pub fn from_array(c: [C64; 3]) -> Result<Self> {
        Self::new(CVec3::new(c[0], c[1], c[2]))
    }

    pub fn coeffs(&self) -> &CVec3 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }
}

impl From<StateVector> for CVec3 {
    fn from(s: StateVector) -> CVec3 {
        s.0
    }
}

/// Preset magnetization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedState {
    X,
    Y,
    Z,
}

impl FromStr for NamedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(NamedState::X),
            "y" => Ok(NamedState::Y),
            "z" => Ok(NamedState::Z),
            _ => Err(Error::UnknownState(s.to_string())),
        }
    }
}

impl fmt::Display for NamedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NamedState::X => "x",
            NamedState::Y => "y",
            NamedState::Z => "z",
        })
    }
}

/// Unit-norm `Ix`, `Iy` or `Iz` state.
///
/// `x = exp(-i pi/2 Ly) z` and `y = exp(+i pi/2 Lx) z` under
/// [`standard_generators`].
pub fn named_state(name: NamedState) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let o = C64::new(0.0, 0.0);
    StateVector(match name {
        NamedState::Z => CVec3::new(o, C64::new(1.0, 0.0), o),
        NamedState::X => CVec3::new(C64::new(-s, 0.0), o, C64::new(s, 0.0)),
        NamedState::Y => CVec3::new(C64::new(0.0, s), o, C64::new(0.0, s)),
    })
}

/// Random pulse with every amplitude uniform in `[-scale, scale]`.
///
/// The stream is ChaCha8 seeded through `SeedableRng::seed_from_u64`, drawn
/// slice by slice in `x, y, z` order, so the result is a pure function of
/// `(slices, scale, seed, dt)`.
pub fn random_pulse(slices: usize, scale: f64, seed: u64, dt: f64) -> Result<ControlPulse> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude scale must be positive, got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..slices)
        .map(|_| {
            [
                rng.random_range(-scale..=scale),
                rng.random_range(-scale..=scale),
                rng.random_range(-scale..=scale),
            ]
        })
        .collect();
    ControlPulse::new(rows, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::expm;
    use std::f64::consts::PI;

    fn max_abs(m: &CMat3) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    #[test]
    fn lz_is_diagonal_descending() {
        let g = standard_generators();
        let d: Vec<f64> = (0..3).map(|k| g.lz[(k, k)].re).collect();
        assert_eq!(d, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn generators_are_hermitian_and_commute_cyclically() {
        let g = standard_generators();
        for l in [g.lx, g.ly, g.lz] {
            assert!(max_abs(&(l - l.adjoint())) <= 1e-15);
        }
        let comm = |a: &CMat3, b: &CMat3| a * b - b * a;
        assert!(max_abs(&(comm(&g.lx, &g.ly) - g.lz * i())) <= 1e-14);
        assert!(max_abs(&(comm(&g.ly, &g.lz) - g.lx * i())) <= 1e-14);
        assert!(max_abs(&(comm(&g.lz, &g.lx) - g.ly * i())) <= 1e-14);
    }

    #[test]
    fn generator_spectra_and_casimir() {
        let g = standard_generators();
        for l in [g.lx, g.ly, g.lz] {
            let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for (got, want) in ev.iter().zip([-1.0, 0.0, 1.0]) {
                assert!((got - want).abs() <= 1e-14, "{ev:?}");
            }
        }
        let cas = g.lx * g.lx + g.ly * g.ly + g.lz * g.lz;
        assert!(max_abs(&(cas - CMat3::identity() * C64::from(2.0))) <= 1e-14);
    }

    #[test]
    fn pi_rotation_about_x_inverts_z() {
        let g = standard_generators();
        let r = expm(&(g.lx * C64::new(0.0, -PI))).unwrap();
        let out = r * *named_state(NamedState::Z).coeffs();
        let want = CVec3::new(C64::from(0.0), C64::from(-1.0), C64::from(0.0));
        assert!((out - want).norm() <= 1e-14, "{out}");
    }

    #[test]
    fn named_states_follow_rotations() {
        let g = standard_generators();
        let z = *named_state(NamedState::Z).coeffs();
        let x = expm(&(g.ly * C64::new(0.0, -PI / 2.0))).unwrap() * z;
        let y = expm(&(g.lx * C64::new(0.0, PI / 2.0))).unwrap() * z;
        assert!((x - named_state(NamedState::X).coeffs()).norm() <= 1e-14);
        assert!((y - named_state(NamedState::Y).coeffs()).norm() <= 1e-14);
        // z rotation by +pi/2 takes x to y
        let zr = expm(&(g.lz * C64::new(0.0, -PI / 2.0))).unwrap();
        assert!((zr * named_state(NamedState::X).coeffs() - y).norm() <= 1e-14);
    }

    #[test]
    fn named_states_are_orthonormal() {
        let s = [NamedState::X, NamedState::Y, NamedState::Z].map(named_state);
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s[a].inner(&s[b]) - C64::from(want)).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn unknown_state_name_is_rejected() {
        assert_eq!(
            "w".parse::<NamedState>(),
            Err(Error::UnknownState("w".into()))
        );
        assert_eq!(" X ".parse::<NamedState>(), Ok(NamedState::X));
    }

    #[test]
    fn random_pulse_is_deterministic_and_bounded() {
        let scale = 2.0 * PI * 1000.0;
        let a = random_pulse(4, scale, 7, 1e-5).unwrap();
        let b = random_pulse(4, scale, 7, 1e-5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_pulse(4, scale, 8, 1e-5).unwrap());
        let p = random_pulse(128, scale, 1, 1e-5).unwrap();
        assert_eq!(p.len(), 128);
        assert!(p.to_flat().iter().all(|v| v.abs() <= scale));
    }

    #[test]
    fn degenerate_pulses_are_rejected() {
        assert!(random_pulse(1, 0.0, 1, 1e-5).is_err());
        assert!(ControlPulse::new(vec![], 1e-5).is_err());
        assert!(ControlPulse::new(vec![[0.0; 3]], 0.0).is_err());
        assert!(ControlPulse::new(vec![[f64::NAN, 0.0, 0.0]], 1e-5).is_err());
        assert!(SpinSystem::new(f64::INFINITY).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let p = random_pulse(5, 3.0, 2, 1e-3).unwrap();
        assert_eq!(ControlPulse::from_flat(&p.to_flat(), 1e-3).unwrap(), p);
        assert!(ControlPulse::from_flat(&[1.0, 2.0], 1e-3).is_err());
    }
}
