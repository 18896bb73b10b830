// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Exponential-free propagator derivatives.
//!
//! For a slice with field vector `v = (x, y, z)`, `r = |v|`, `phi = r dt / 2`
//! and the skew matrix `S(v)`, the derivative of the propagator along channel
//! `k` is `D_k = P unvec(Sigma Theta_k)`, where `Theta_k` is column `k` of
//!
//! ```text
//! M = I + f(r) S + g(r) S^2,
//! f = sin^2(phi) / (phi r),   g = (2 phi - sin 2 phi) / (2 phi r^2)
//! ```
//!
//! and `Sigma = [vec Cx, vec Cy, vec Cz]` with `Ck = -i Lk dt`. Second
//! derivatives are `D2_jk = P (unvec(Sigma Theta_jk) + X_j X_k)` with
//! `X_k = unvec(Sigma Theta_k)` and `Theta_jk` column `k` of `dM/dv_j`:
//!
//! ```text
//! dM/dv_j = f dS_j + g (S dS_j + dS_j S) + v_j (f'(r)/r S + g'(r)/r S^2)
//! ```
//!
//! All coefficients are written as functions of `phi` with their `r -> 0`
//! limits handled by series below `phi = 0.1`, so `r = 0` needs no special
//! case. The only propagator used here is the Wigner closed form.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::derivatives::{pair_index, DerivativeOrder, DerivativeSet};
use crate::propagation::{sinc, wigner_factors, wigner_propagator, Propagator, SMALL_PHI};
use crate::spinops::{Direction, Generators, SpinSystem};
use crate::{CMat3, C64};

/// `(phi cos phi - sin phi) / phi^3`
fn q_coef(phi: f64) -> f64 {
    if phi.abs() < SMALL_PHI {
        let p2 = phi * phi;
        -1.0 / 3.0 + p2 * (1.0 / 30.0 + p2 * (-1.0 / 840.0 + p2 * (1.0 / 45360.0 - p2 / 3991680.0)))
    } else {
        (phi * phi.cos() - phi.sin()) / (phi * phi * phi)
    }
}

/// `(2 phi - sin 2 phi) / (2 phi^3)`
fn h_coef(phi: f64) -> f64 {
    if phi.abs() < SMALL_PHI {
        let p2 = phi * phi;
        2.0 / 3.0
            + p2 * (-2.0 / 15.0 + p2 * (4.0 / 315.0 + p2 * (-2.0 / 2835.0 + p2 * 4.0 / 155925.0)))
    } else {
        (2.0 * phi - (2.0 * phi).sin()) / (2.0 * phi * phi * phi)
    }
}

/// `h'(phi) / phi`
fn hp_coef(phi: f64) -> f64 {
    if phi.abs() < SMALL_PHI {
        let p2 = phi * phi;
        -4.0 / 15.0
            + p2 * (16.0 / 315.0
                + p2 * (-4.0 / 945.0 + p2 * (32.0 / 155925.0 - p2 * 8.0 / 1216215.0)))
    } else {
        let (s2, c2) = (2.0 * phi).sin_cos();
        (2.0 * phi * (1.0 - c2) - 6.0 * phi + 3.0 * s2) / (2.0 * phi.powi(5))
    }
}

/// Skew-symmetric field matrix and its constant partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewS {
    pub s: Matrix3<f64>,
}

impl SkewS {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        #[rustfmt::skip]
        let s = Matrix3::new(
            0.0, z, -y,
            -z, 0.0, x,
            y, -x, 0.0,
        );
        Self { s }
    }

    /// `dS/dj`.
    pub fn partial(j: Direction) -> Matrix3<f64> {
        match j {
            Direction::X => SkewS::new(1.0, 0.0, 0.0).s,
            Direction::Y => SkewS::new(0.0, 1.0, 0.0).s,
            Direction::Z => SkewS::new(0.0, 0.0, 1.0).s,
        }
    }
}

/// `M = I + f S + g S^2`; `Theta_k` is column `k` (the `k`-th 3-segment of
/// the column-major `vec M`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaFirst {
    pub m: Matrix3<f64>,
}

impl ThetaFirst {
    pub fn theta(&self, k: Direction) -> Vector3<f64> {
        self.m.column(k.index()).into_owned()
    }
}

/// `dM/dv_j`; column `k` is `Theta_jk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSecond {
    pub direction: Direction,
    pub dm: Matrix3<f64>,
}

impl ThetaSecond {
    pub fn theta(&self, k: Direction) -> Vector3<f64> {
        self.dm.column(k.index()).into_owned()
    }
}

/// Columns `vec Cx, vec Cy, vec Cz` (column-major vec), `Ck = -i Lk dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaMatrix {
    pub columns: SMatrix<C64, 9, 3>,
}

impl SigmaMatrix {
    pub fn new(generators: &Generators, dt: f64) -> Self {
        let m = C64::new(0.0, -dt);
        let mut columns = SMatrix::<C64, 9, 3>::zeros();
        for d in Direction::ALL {
            let c = generators.get(d) * m;
            columns.column_mut(d.index()).copy_from_slice(c.as_slice());
        }
        Self { columns }
    }

    /// `unvec(Sigma theta)`.
    pub fn apply(&self, theta: &Vector3<f64>) -> CMat3 {
        let mut out = CMat3::zeros();
        for (o, row) in out.as_mut_slice().iter_mut().zip(self.columns.row_iter()) {
            *o = row[0] * theta[0] + row[1] * theta[1] + row[2] * theta[2];
        }
        out
    }
}

struct Coefs {
    f: f64,
    g: f64,
    df_r: f64,
    dg_r: f64,
}

fn coefs(phi: f64, dt: f64, second: bool) -> Coefs {
    let sc = sinc(phi);
    let h = dt / 2.0;
    let (df_r, dg_r) = if second {
        (h * h * h * 2.0 * sc * q_coef(phi), h.powi(4) * hp_coef(phi))
    } else {
        (0.0, 0.0)
    };
    Coefs {
        f: h * sc * sc,
        g: h * h * h_coef(phi),
        df_r,
        dg_r,
    }
}

fn phi_of(x: f64, y: f64, z: f64, dt: f64) -> f64 {
    0.5 * (x * x + y * y + z * z).sqrt() * dt
}

pub fn theta_first(x: f64, y: f64, z: f64, dt: f64) -> ThetaFirst {
    let s = SkewS::new(x, y, z).s;
    let c = coefs(phi_of(x, y, z, dt), dt, false);
    ThetaFirst {
        m: Matrix3::identity() + s * c.f + s * s * c.g,
    }
}

pub fn theta_second(j: Direction, x: f64, y: f64, z: f64, dt: f64) -> ThetaSecond {
    let s = SkewS::new(x, y, z).s;
    let c = coefs(phi_of(x, y, z, dt), dt, true);
    theta_second_with(j, &s, &(s * s), [x, y, z], &c)
}

fn theta_second_with(
    j: Direction,
    s: &Matrix3<f64>,
    s2: &Matrix3<f64>,
    v: [f64; 3],
    c: &Coefs,
) -> ThetaSecond {
    let ds = SkewS::partial(j);
    let vj = v[j.index()];
    ThetaSecond {
        direction: j,
        dm: ds * c.f + (s * ds + ds * s) * c.g + s * (vj * c.df_r) + s2 * (vj * c.dg_r),
    }
}

/// `D_k = P unvec(Sigma Theta_k)`.
pub fn escalade_first(
    p: &Propagator,
    sigma: &SigmaMatrix,
    theta: &ThetaFirst,
    k: Direction,
) -> CMat3 {
    p.0 * sigma.apply(&theta.theta(k))
}

/// `D2_jk = P unvec(Sigma Theta_jk) + P unvec(Sigma Theta_j) unvec(Sigma Theta_k)`,
/// with `theta_j` the second-order coefficients for direction `j`.
pub fn escalade_second(
    p: &Propagator,
    sigma: &SigmaMatrix,
    theta: &ThetaFirst,
    theta_j: &ThetaSecond,
    k: Direction,
) -> CMat3 {
    let xj = sigma.apply(&theta.theta(theta_j.direction));
    let xk = sigma.apply(&theta.theta(k));
    p.0 * (sigma.apply(&theta_j.theta(k)) + xj * xk)
}

/// Full derivative set of one slice.
pub fn escalade_derivatives(
    sys: &SpinSystem,
    controls: [f64; 3],
    dt: f64,
    order: DerivativeOrder,
) -> DerivativeSet {
    let sigma = SigmaMatrix::new(sys.generators(), dt);
    escalade_derivatives_with(&sigma, sys.offset(), controls, dt, order)
}

/// As [`escalade_derivatives`] with a prebuilt `Sigma` for this `dt`.
pub fn escalade_derivatives_with(
    sigma: &SigmaMatrix,
    offset: f64,
    controls: [f64; 3],
    dt: f64,
    order: DerivativeOrder,
) -> DerivativeSet {
    let f = wigner_factors(controls[0], controls[1], controls[2], offset, dt);
    let p = wigner_propagator(&f);
    let v = [f.x, f.y, f.z];
    let s = SkewS::new(f.x, f.y, f.z).s;
    let s2 = s * s;
    let second = order == DerivativeOrder::Second;
    let c = coefs(f.phi, dt, second);
    let m = Matrix3::identity() + s * c.f + s2 * c.g;

    let x = Direction::ALL.map(|k| sigma.apply(&m.column(k.index()).into_owned()));
    let first = x.map(|xk| p.0 * xk);

    let second = second.then(|| {
        let mut out = [CMat3::zeros(); 6];
        for j in Direction::ALL {
            let tj = theta_second_with(j, &s, &s2, v, &c);
            for k in Direction::ALL.into_iter().filter(|&k| k >= j) {
                let y = sigma.apply(&tj.theta(k)) + x[j.index()] * x[k.index()];
                out[pair_index(j, k)] = p.0 * y;
            }
        }
        out
    });

    DerivativeSet {
        propagator: p,
        first,
        second,
    }
}
