// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! State-to-state fidelity and its exact gradient and Hessian.
//!
//! The objective is `F = Re<sigma|U_1^N|rho_0> / (|sigma| |rho_0|)`.
//! Gradient and Hessian entries are indexed slice-major (`3 n + k`).
//!
//! Two Hessian assemblies are provided and must agree to rounding:
//!
//! * **standard**: for every pair of slices `m < n` the ket
//!   `D_{j,m} rho_{m-1}` is carried through the central propagator
//!   `U_{m+1}^{n-1}`, which is extended by one slice per step, and contracted
//!   with the bra `<chi_{n+1}| D_{k,n}`. This costs `N(N-1)/2` propagator
//!   applications.
//! * **accelerated**: both sides are moved to `t_0`. One forward sweep builds
//!   the derivative trajectory `U_m^1 D_{j,m} rho_{m-1}`, one backward sweep
//!   builds the rows `<chi_{n+1}| D_{k,n} U_1^{n-1}`, and every cross-slice
//!   element of a row is a single product of that row with the trajectory.
//!   The rows of all ensemble members are stacked, so each block of rows is
//!   one dense matrix product.
//!
//! Same-slice 3x3 blocks always come from the second derivatives
//! `Re<chi_{n+1}|D2_{jk,n}|rho_{n-1}>`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::derivatives::{
    pair_index, slice_derivatives, DerivativeMethod, DerivativeOrder, DerivativeSet,
};
use crate::error::{Error, Result};
use crate::escalade::{escalade_derivatives_with, SigmaMatrix};
use crate::propagation::{exponential_propagator, slice_propagator, Propagator};
use crate::spinops::{ControlPulse, Direction, SpinSystem, StateVector};
use crate::{CMat3, CVec3};

/// Which Hessian assembly to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HessianMode {
    Standard,
    Accelerated,
}

impl HessianMode {
    pub fn name(self) -> &'static str {
        match self {
            HessianMode::Standard => "standard",
            HessianMode::Accelerated => "accelerated",
        }
    }
}

impl fmt::Display for HessianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HessianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(HessianMode::Standard),
            "accelerated" => Ok(HessianMode::Accelerated),
            other => Err(Error::InvalidArgument(format!(
                "unknown hessian mode `{other}` (expected standard or accelerated)"
            ))),
        }
    }
}

/// Requested outputs of an objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Want {
    Fidelity,
    Gradient,
    Hessian,
}

/// Number of slice-propagator applications, summed over systems. Applying a
/// slice propagator to everything carried along a sweep counts once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagationCount {
    pub forward: u64,
    pub backward: u64,
}

impl std::ops::AddAssign for PropagationCount {
    fn add_assign(&mut self, o: Self) {
        self.forward += o.forward;
        self.backward += o.backward;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    pub fidelity: f64,
    /// Length `3N`, present for `Want::Gradient` and `Want::Hessian`.
    pub gradient: Option<DVector<f64>>,
    /// `3N x 3N` symmetric, present for `Want::Hessian`.
    pub hessian: Option<DMatrix<f64>>,
    pub propagations: PropagationCount,
}

/// Derivative trajectory evaluated at `t_0`: `columns[j][m]` is
/// `U_m^1 D_{j,m} rho_{m-1}` (zero-based slice `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTrajectory {
    pub columns: [Vec<CVec3>; 3],
}

/// One ensemble member; `weight` multiplies its contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Member {
    pub offset: f64,
    pub weight: f64,
}

pub fn fidelity(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
) -> Result<f64> {
    let scale = normalization(rho0, sigma)?;
    let mut rho = *rho0.coeffs();
    for &c in pulse.amplitudes() {
        rho = slice_propagator(sys, c, pulse.dt()).0 * rho;
    }
    Ok(sigma.coeffs().dotc(&rho).re * scale)
}

pub fn gradient(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
    method: DerivativeMethod,
) -> Result<DVector<f64>> {
    let r = objective(
        sys,
        pulse,
        rho0,
        sigma,
        method,
        Want::Gradient,
        HessianMode::Accelerated,
    )?;
    Ok(r.gradient.expect("gradient requested"))
}

pub fn hessian_standard(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
    method: DerivativeMethod,
) -> Result<DMatrix<f64>> {
    let r = objective(
        sys,
        pulse,
        rho0,
        sigma,
        method,
        Want::Hessian,
        HessianMode::Standard,
    )?;
    Ok(r.hessian.expect("hessian requested"))
}

pub fn hessian_accelerated(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
    method: DerivativeMethod,
) -> Result<DMatrix<f64>> {
    let r = objective(
        sys,
        pulse,
        rho0,
        sigma,
        method,
        Want::Hessian,
        HessianMode::Accelerated,
    )?;
    Ok(r.hessian.expect("hessian requested"))
}

/// Single-system objective with everything up to `want`.
pub fn objective(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
    method: DerivativeMethod,
    want: Want,
    mode: HessianMode,
) -> Result<ObjectiveReport> {
    let member = Member {
        offset: sys.offset(),
        weight: 1.0,
    };
    evaluate(&[member], pulse, rho0, sigma, method, want, mode)
}

/// Forward sweep producing `U_m^1 D_{j,m} rho_{m-1}` for every slice.
pub fn derivative_trajectory(
    sys: &SpinSystem,
    pulse: &ControlPulse,
    rho0: &StateVector,
    method: DerivativeMethod,
) -> DerivTrajectory {
    let ds = member_derivatives(method, sys, pulse, DerivativeOrder::First);
    let n = pulse.len();
    let mut columns = [vec![], vec![], vec![]].map(|v: Vec<CVec3>| {
        let mut v = v;
        v.reserve(n);
        v
    });
    let mut rho = *rho0.coeffs();
    let mut uadj = CMat3::identity();
    for d in &ds {
        let p = &d.propagator.0;
        uadj *= p.adjoint();
        for (col, dj) in columns.iter_mut().zip(&d.first) {
            col.push(uadj * (dj * rho));
        }
        rho = p * rho;
    }
    DerivTrajectory { columns }
}

fn normalization(rho0: &StateVector, sigma: &StateVector) -> Result<f64> {
    let norm = rho0.norm() * sigma.norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(1.0 / norm)
}

fn member_derivatives(
    method: DerivativeMethod,
    sys: &SpinSystem,
    pulse: &ControlPulse,
    order: DerivativeOrder,
) -> Vec<DerivativeSet> {
    let dt = pulse.dt();
    match method {
        DerivativeMethod::Escalade => {
            let sigma = SigmaMatrix::new(sys.generators(), dt);
            pulse
                .amplitudes()
                .iter()
                .map(|&c| escalade_derivatives_with(&sigma, sys.offset(), c, dt, order))
                .collect()
        }
        DerivativeMethod::Auxmat => pulse
            .amplitudes()
            .iter()
            .map(|&c| slice_derivatives(method, sys, c, dt, order))
            .collect(),
    }
}

/// `Re(a^dagger b)`
#[inline]
fn re_dot(a: &CVec3, b: &CVec3) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub(crate) fn evaluate(
    members: &[Member],
    pulse: &ControlPulse,
    rho0: &StateVector,
    sigma: &StateVector,
    method: DerivativeMethod,
    want: Want,
    mode: HessianMode,
) -> Result<ObjectiveReport> {
    let scale = normalization(rho0, sigma)?;
    let systems = members
        .iter()
        .map(|m| SpinSystem::new(m.offset))
        .collect::<Result<Vec<_>>>()?;
    let ctx = Ctx {
        pulse,
        rho0: *rho0.coeffs(),
        sigma: *sigma.coeffs(),
        method,
    };
    match want {
        Want::Fidelity => {
            let parts: Vec<(f64, PropagationCount)> = systems
                .par_iter()
                .map(|sys| ctx.fidelity_only(sys))
                .collect::<Result<_>>()?;
            let mut report = ObjectiveReport {
                fidelity: 0.0,
                gradient: None,
                hessian: None,
                propagations: PropagationCount::default(),
            };
            for (m, (f, c)) in members.iter().zip(parts) {
                report.fidelity += m.weight * scale * f;
                report.propagations += c;
            }
            Ok(report)
        }
        Want::Gradient => {
            let parts: Vec<GradMember> = systems.par_iter().map(|sys| ctx.gradient(sys)).collect();
            let n3 = 3 * pulse.len();
            let mut grad = DVector::zeros(n3);
            let mut fid = 0.0;
            let mut counts = PropagationCount::default();
            for (m, part) in members.iter().zip(parts) {
                let w = m.weight * scale;
                fid += w * part.fidelity;
                grad.axpy(w, &DVector::from_vec(part.gradient), 1.0);
                counts += part.counts;
            }
            Ok(ObjectiveReport {
                fidelity: fid,
                gradient: Some(grad),
                hessian: None,
                propagations: counts,
            })
        }
        Want::Hessian => match mode {
            HessianMode::Accelerated => ctx.hessian_accelerated(members, &systems, scale),
            HessianMode::Standard => ctx.hessian_standard(members, &systems, scale),
        },
    }
}

struct Ctx<'a> {
    pulse: &'a ControlPulse,
    rho0: CVec3,
    sigma: CVec3,
    method: DerivativeMethod,
}

struct GradMember {
    fidelity: f64,
    gradient: Vec<f64>,
    counts: PropagationCount,
}

/// Per-member data shared by both Hessian assemblies.
struct SweepMember {
    fidelity: f64,
    gradient: Vec<f64>,
    /// `Re<chi_{n+1}|D2_{jk,n}|rho_{n-1}>` row-major in `(k, j)`.
    blocks: Vec<[f64; 9]>,
    counts: PropagationCount,
}

struct AccMember {
    sweep: SweepMember,
    /// `U_1^{n-1 dagger} D_{k,n}^dagger chi_{n+1}` at `3 n + k`.
    rows: Vec<CVec3>,
    /// `U_m^1 D_{j,m} rho_{m-1}` at `3 m + j`.
    traj: Vec<CVec3>,
}

struct StdMember {
    sweep: SweepMember,
    props: Vec<CMat3>,
    /// `D_{j,m} rho_{m-1}` at `3 m + j`.
    kets: Vec<CVec3>,
    /// `D_{k,n}^dagger chi_{n+1}` at `3 n + k`.
    bras: Vec<CVec3>,
}

impl Ctx<'_> {
    fn fidelity_only(&self, sys: &SpinSystem) -> Result<(f64, PropagationCount)> {
        let dt = self.pulse.dt();
        let mut rho = self.rho0;
        for &c in self.pulse.amplitudes() {
            let p: Propagator = match self.method {
                DerivativeMethod::Auxmat => exponential_propagator(sys, c, dt)?,
                DerivativeMethod::Escalade => slice_propagator(sys, c, dt),
            };
            rho = p.0 * rho;
        }
        let n = self.pulse.len() as u64;
        Ok((
            self.sigma.dotc(&rho).re,
            PropagationCount {
                forward: n,
                backward: 0,
            },
        ))
    }

    fn gradient(&self, sys: &SpinSystem) -> GradMember {
        let ds = member_derivatives(self.method, sys, self.pulse, DerivativeOrder::First);
        let n = ds.len();
        let mut rhos = Vec::with_capacity(n);
        let mut rho = self.rho0;
        for d in &ds {
            rhos.push(rho);
            rho = d.propagator.0 * rho;
        }
        let fidelity = self.sigma.dotc(&rho).re;
        let mut gradient = vec![0.0; 3 * n];
        let mut chi = self.sigma;
        for (i, d) in ds.iter().enumerate().rev() {
            for k in 0..3 {
                gradient[3 * i + k] = re_dot(&chi, &(d.first[k] * rhos[i]));
            }
            chi = d.propagator.0.ad_mul(&chi);
        }
        GradMember {
            fidelity,
            gradient,
            counts: PropagationCount {
                forward: n as u64,
                backward: n as u64,
            },
        }
    }

    fn forward_states(&self, ds: &[DerivativeSet]) -> (Vec<CVec3>, CVec3) {
        let mut rhos = Vec::with_capacity(ds.len());
        let mut rho = self.rho0;
        for d in ds {
            rhos.push(rho);
            rho = d.propagator.0 * rho;
        }
        (rhos, rho)
    }

    fn same_slice_block(d: &DerivativeSet, chi: &CVec3, rho: &CVec3) -> [f64; 9] {
        let second = d.second.as_ref().expect("second-order derivatives");
        let mut b = [0.0; 9];
        for j in Direction::ALL {
            for k in Direction::ALL.into_iter().filter(|&k| k >= j) {
                let v = re_dot(chi, &(second[pair_index(j, k)] * rho));
                b[3 * k.index() + j.index()] = v;
                b[3 * j.index() + k.index()] = v;
            }
        }
        b
    }

    fn accelerated_member(&self, sys: &SpinSystem) -> AccMember {
        let ds = member_derivatives(self.method, sys, self.pulse, DerivativeOrder::Second);
        let n = ds.len();
        let mut counts = PropagationCount::default();

        // forward: rho_{m-1}, U_m^1 and the derivative trajectory
        let mut rhos = Vec::with_capacity(n);
        let mut traj = Vec::with_capacity(3 * n);
        let mut rho = self.rho0;
        let mut uadj = CMat3::identity();
        for d in &ds {
            let p = &d.propagator.0;
            rhos.push(rho);
            uadj *= p.adjoint();
            for j in 0..3 {
                traj.push(uadj * (d.first[j] * rho));
            }
            rho = p * rho;
            counts.forward += 1;
        }
        let fidelity = self.sigma.dotc(&rho).re;

        // backward: chi_{n+1}, U_1^{n-1} and the Hessian rows
        let mut u = uadj.adjoint();
        let mut chi = self.sigma;
        let mut rows = vec![CVec3::zeros(); 3 * n];
        let mut gradient = vec![0.0; 3 * n];
        let mut blocks = vec![[0.0; 9]; n];
        for (i, d) in ds.iter().enumerate().rev() {
            let p = &d.propagator.0;
            u = p.ad_mul(&u);
            for k in 0..3 {
                let w = d.first[k].ad_mul(&chi);
                gradient[3 * i + k] = re_dot(&w, &rhos[i]);
                rows[3 * i + k] = u.ad_mul(&w);
            }
            blocks[i] = Self::same_slice_block(d, &chi, &rhos[i]);
            chi = p.ad_mul(&chi);
            counts.backward += 1;
        }
        AccMember {
            sweep: SweepMember {
                fidelity,
                gradient,
                blocks,
                counts,
            },
            rows,
            traj,
        }
    }

    fn standard_member(&self, sys: &SpinSystem) -> StdMember {
        let ds = member_derivatives(self.method, sys, self.pulse, DerivativeOrder::Second);
        let n = ds.len();
        let (rhos, rho_n) = self.forward_states(&ds);
        let fidelity = self.sigma.dotc(&rho_n).re;
        let mut kets = Vec::with_capacity(3 * n);
        for (d, r) in ds.iter().zip(&rhos) {
            for j in 0..3 {
                kets.push(d.first[j] * r);
            }
        }
        let mut chi = self.sigma;
        let mut bras = vec![CVec3::zeros(); 3 * n];
        let mut gradient = vec![0.0; 3 * n];
        let mut blocks = vec![[0.0; 9]; n];
        for (i, d) in ds.iter().enumerate().rev() {
            for k in 0..3 {
                let w = d.first[k].ad_mul(&chi);
                gradient[3 * i + k] = re_dot(&w, &rhos[i]);
                bras[3 * i + k] = w;
            }
            blocks[i] = Self::same_slice_block(d, &chi, &rhos[i]);
            chi = d.propagator.0.ad_mul(&chi);
        }
        StdMember {
            sweep: SweepMember {
                fidelity,
                gradient,
                blocks,
                counts: PropagationCount {
                    forward: n as u64,
                    backward: n as u64,
                },
            },
            props: ds.iter().map(|d| d.propagator.0).collect(),
            kets,
            bras,
        }
    }

    fn hessian_accelerated(
        &self,
        members: &[Member],
        systems: &[SpinSystem],
        scale: f64,
    ) -> Result<ObjectiveReport> {
        let n = self.pulse.len();
        let n3 = 3 * n;
        let e = members.len();
        let parts: Vec<AccMember> = systems
            .par_iter()
            .map(|sys| self.accelerated_member(sys))
            .collect();

        // Stack the members: row (n,k) of `rows` holds [w Re b, w Im b] per
        // member, column (m,j) of `traj` holds [Re d, Im d], so that
        // rows * traj = sum_e w_e Re<b_e|d_e>.
        let mut row_mat = DMatrix::<f64>::zeros(n3, 6 * e);
        let mut traj_mat = DMatrix::<f64>::zeros(6 * e, n3);
        for (idx, (m, part)) in members.iter().zip(&parts).enumerate() {
            let w = m.weight * scale;
            for (r, b) in part.rows.iter().enumerate() {
                for c in 0..3 {
                    row_mat[(r, 6 * idx + c)] = w * b[c].re;
                    row_mat[(r, 6 * idx + 3 + c)] = w * b[c].im;
                }
            }
            for (col, d) in part.traj.iter().enumerate() {
                for c in 0..3 {
                    traj_mat[(6 * idx + c, col)] = d[c].re;
                    traj_mat[(6 * idx + 3 + c, col)] = d[c].im;
                }
            }
        }

        let mut hess = DMatrix::<f64>::zeros(n3, n3);
        // Row blocks of slices; each block only needs trajectory columns up
        // to its own last slice. Entries at or above the slice diagonal that
        // this produces are overwritten below.
        const BLOCK: usize = 64;
        for s0 in (0..n).step_by(BLOCK) {
            let s1 = (s0 + BLOCK).min(n);
            let rows = 3 * (s1 - s0);
            let cols = 3 * s1;
            let mut target = hess.view_mut((3 * s0, 0), (rows, cols));
            target.gemm(
                1.0,
                &row_mat.view((3 * s0, 0), (rows, 6 * e)),
                &traj_mat.view((0, 0), (6 * e, cols)),
                0.0,
            );
        }

        let sweeps: Vec<SweepMember> = parts.into_iter().map(|p| p.sweep).collect();
        Ok(finish(
            members,
            sweeps,
            scale,
            hess,
            PropagationCount::default(),
        ))
    }

    fn hessian_standard(
        &self,
        members: &[Member],
        systems: &[SpinSystem],
        scale: f64,
    ) -> Result<ObjectiveReport> {
        let n = self.pulse.len();
        let n3 = 3 * n;
        let parts: Vec<StdMember> = systems
            .par_iter()
            .map(|sys| self.standard_member(sys))
            .collect();
        let weights: Vec<f64> = members.iter().map(|m| m.weight * scale).collect();

        // Column-major storage: the three columns of slice m are contiguous,
        // and the entries below the slice diagonal are rows n > m.
        let mut hess = DMatrix::<f64>::zeros(n3, n3);
        let central_steps: u64 = hess
            .as_mut_slice()
            .par_chunks_mut(3 * n3)
            .enumerate()
            .map(|(m, cols)| {
                let mut steps = 0u64;
                for (part, &w) in parts.iter().zip(&weights) {
                    let mut central = CMat3::identity();
                    for nn in m + 1..n {
                        if nn > m + 1 {
                            central = part.props[nn - 1] * central;
                            steps += 1;
                        }
                        for j in 0..3 {
                            let v = central * part.kets[3 * m + j];
                            let col = &mut cols[j * n3..(j + 1) * n3];
                            for k in 0..3 {
                                col[3 * nn + k] += w * re_dot(&part.bras[3 * nn + k], &v);
                            }
                        }
                    }
                }
                steps
            })
            .sum();

        let sweeps: Vec<SweepMember> = parts.into_iter().map(|p| p.sweep).collect();
        let extra = PropagationCount {
            forward: central_steps,
            backward: 0,
        };
        Ok(finish(members, sweeps, scale, hess, extra))
    }
}

/// Reduces per-member fidelity, gradient and same-slice blocks in member
/// order, writes the same-slice blocks and mirrors the lower slice triangle.
fn finish(
    members: &[Member],
    sweeps: Vec<SweepMember>,
    scale: f64,
    mut hess: DMatrix<f64>,
    extra: PropagationCount,
) -> ObjectiveReport {
    let n3 = hess.nrows();
    let n = n3 / 3;
    let mut fid = 0.0;
    let mut grad = DVector::zeros(n3);
    let mut blocks = vec![[0.0; 9]; n];
    let mut counts = extra;
    for (m, s) in members.iter().zip(sweeps) {
        let w = m.weight * scale;
        fid += w * s.fidelity;
        for (g, v) in grad.iter_mut().zip(&s.gradient) {
            *g += w * v;
        }
        for (acc, b) in blocks.iter_mut().zip(&s.blocks) {
            for (a, v) in acc.iter_mut().zip(b) {
                *a += w * v;
            }
        }
        counts += s.counts;
    }
    for (i, b) in blocks.iter().enumerate() {
        for k in 0..3 {
            for j in 0..3 {
                hess[(3 * i + k, 3 * i + j)] = b[3 * k + j];
            }
        }
    }
    mirror_lower(&mut hess);
    ObjectiveReport {
        fidelity: fid,
        gradient: Some(grad),
        hessian: Some(hess),
        propagations: counts,
    }
}

/// Copies entries with row slice > column slice onto their transposes.
fn mirror_lower(h: &mut DMatrix<f64>) {
    let n3 = h.nrows();
    const TILE: usize = 48;
    for c0 in (0..n3).step_by(TILE) {
        for r0 in (c0..n3).step_by(TILE) {
            for c in c0..(c0 + TILE).min(n3) {
                for r in r0.max(c)..(r0 + TILE).min(n3) {
                    if r / 3 > c / 3 {
                        h[(c, r)] = h[(r, c)];
                    }
                }
            }
        }
    }
}
