// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Propagator derivatives from exponentials of block upper-triangular
//! auxiliary matrices.
//!
//! ```text
//! exp [[A, Cj, 0 ], [0, A, Ck], [0, 0, A]] = [[P, Dj, Kjk], [0, P, Dk], [0, 0, P]]
//! ```
//!
//! with `A = -i L_n dt` and `Ck = -i Lk dt`. The corner `Kjk` is the
//! ordered double integral `int e^{..} Cj e^{..} Ck e^{..}`; the mixed second
//! derivative is the sum over both orderings, `D2_jk = Kjk + Kkj`, which
//! reduces to `2 Kjj` on the diagonal.
//!
//! With equal off-diagonal blocks `B` the auxiliary matrix is block
//! Toeplitz and its exponential is `exp(A + e B)` truncated at `e^3`, which
//! [`Jet`] evaluates without forming the 9x9 matrix. Mixed pairs use
//! `B = Cj + Ck` and polarization: `Kjk + Kkj = K(Cj+Ck) - Kjj - Kkk`.

use crate::derivatives::{pair_index, DerivativeOrder, DerivativeSet};
use crate::expm::{expm_unchecked, Jet, PadeAlgebra};
use crate::propagation::Propagator;
use crate::spinops::{Direction, SpinSystem};
use crate::{CMat3, C64};

/// Blocks of the auxiliary matrices for one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxBlocks {
    /// `-i L_n dt`.
    pub a: CMat3,
    /// `-i Lk dt` for `k = x, y, z`.
    pub c: [CMat3; 3],
}

impl AuxBlocks {
    pub fn new(sys: &SpinSystem, controls: [f64; 3], dt: f64) -> Self {
        let m = C64::new(0.0, -dt);
        let g = sys.generators();
        Self {
            a: sys.liouvillian(controls) * m,
            c: Direction::ALL.map(|d| g.get(d) * m),
        }
    }
}

/// `(P, D_k)` from the 6x6 auxiliary exponential. Inputs must be finite.
pub fn auxmat_first(a: &CMat3, ck: &CMat3) -> (Propagator, CMat3) {
    let e = expm_unchecked(&Jet([*a, *ck]));
    (Propagator(e.0[0]), e.0[1])
}

/// `(P, D_B, K_BB)` of the 9x9 auxiliary exponential with both
/// off-diagonal blocks equal to `b`.
fn exp_toeplitz(a: &CMat3, b: &CMat3) -> Jet<3> {
    expm_unchecked(&Jet([*a, *b, CMat3::zeros()]))
}

/// Second-order output for one pair of directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxSecond {
    pub propagator: Propagator,
    pub d_j: CMat3,
    pub d_k: CMat3,
    pub d_jk: CMat3,
}

/// `(P, D_j, D_k, D2_jk)`; one auxiliary exponential when `cj == ck`,
/// three otherwise. Inputs must be finite.
pub fn auxmat_second(a: &CMat3, cj: &CMat3, ck: &CMat3) -> AuxSecond {
    let ej = exp_toeplitz(a, cj);
    let two = C64::from(2.0);
    if cj == ck {
        return AuxSecond {
            propagator: Propagator(ej.0[0]),
            d_j: ej.0[1],
            d_k: ej.0[1],
            d_jk: ej.0[2] * two,
        };
    }
    let ek = exp_toeplitz(a, ck);
    let ejk = exp_toeplitz(a, &(cj + ck));
    AuxSecond {
        propagator: Propagator(ej.0[0]),
        d_j: ej.0[1],
        d_k: ek.0[1],
        d_jk: ejk.0[2] - ej.0[2] - ek.0[2],
    }
}

/// `X0 + sum_k e_k X_k + sum_{j<=k} e_j e_k X_jk` with all cubic terms
/// dropped. `SECOND = false` drops the quadratic terms as well.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DirJet<const SECOND: bool> {
    x0: CMat3,
    d: [CMat3; 3],
    /// Indexed by [`pair_index`].
    dd: [CMat3; 6],
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl<const SECOND: bool> PadeAlgebra for DirJet<SECOND> {
    fn identity() -> Self {
        DirJet {
            x0: CMat3::identity(),
            ..Self::zero()
        }
    }
    fn zero() -> Self {
        DirJet {
            x0: CMat3::zeros(),
            d: [CMat3::zeros(); 3],
            dd: [CMat3::zeros(); 6],
        }
    }
    fn mul(&self, o: &Self) -> Self {
        let mut out = DirJet {
            x0: self.x0 * o.x0,
            d: [0, 1, 2].map(|k| self.x0 * o.d[k] + self.d[k] * o.x0),
            dd: [CMat3::zeros(); 6],
        };
        if SECOND {
            for (p, &(j, k)) in PAIRS.iter().enumerate() {
                let mut z = self.x0 * o.dd[p] + self.dd[p] * o.x0 + self.d[j] * o.d[k];
                if j != k {
                    z += self.d[k] * o.d[j];
                }
                out.dd[p] = z;
            }
        }
        out
    }
    fn add_scaled(&self, s: f64, o: &Self) -> Self {
        let s = C64::from(s);
        let mut out = *self;
        out.x0 += o.x0 * s;
        for k in 0..3 {
            out.d[k] += o.d[k] * s;
        }
        if SECOND {
            for p in 0..6 {
                out.dd[p] += o.dd[p] * s;
            }
        }
        out
    }
    fn scale(&self, s: f64) -> Self {
        Self::zero().add_scaled(s, self)
    }
    fn one_norm(&self) -> f64 {
        // column of the regular representation belonging to the monomial 1
        let blocks =
            std::iter::once(&self.x0)
                .chain(&self.d)
                .chain(if SECOND { &self.dd[..] } else { &[] });
        let mut cols = [0.0; 3];
        for b in blocks {
            for (c, acc) in cols.iter_mut().enumerate() {
                *acc += b.column(c).iter().map(|z| z.norm()).sum::<f64>();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }
    fn solve(q: Self, p: Self) -> Self {
        let inv = crate::expm::inverse3(&q.x0);
        let x0 = inv * p.x0;
        let d = [0, 1, 2].map(|k| inv * (p.d[k] - q.d[k] * x0));
        let mut dd = [CMat3::zeros(); 6];
        if SECOND {
            for (i, &(j, k)) in PAIRS.iter().enumerate() {
                let mut rhs = p.dd[i] - q.dd[i] * x0 - q.d[j] * d[k];
                if j != k {
                    rhs -= q.d[k] * d[j];
                }
                dd[i] = inv * rhs;
            }
        }
        DirJet { x0, d, dd }
    }
}

/// Full derivative set of one slice through auxiliary exponentials.
///
/// Both orders use a single auxiliary exponential covering all three
/// directions.
pub fn auxmat_derivatives(
    sys: &SpinSystem,
    controls: [f64; 3],
    dt: f64,
    order: DerivativeOrder,
) -> DerivativeSet {
    let blocks = AuxBlocks::new(sys, controls, dt);
    match order {
        DerivativeOrder::First => {
            let e = expm_unchecked(&DirJet::<false> {
                x0: blocks.a,
                d: blocks.c,
                dd: [CMat3::zeros(); 6],
            });
            DerivativeSet {
                propagator: Propagator(e.x0),
                first: e.d,
                second: None,
            }
        }
        DerivativeOrder::Second => {
            let e = expm_unchecked(&DirJet::<true> {
                x0: blocks.a,
                d: blocks.c,
                dd: [CMat3::zeros(); 6],
            });
            let mut second = e.dd;
            for k in Direction::ALL {
                // the e_k^2 coefficient is half the second derivative
                second[pair_index(k, k)] *= C64::from(2.0);
            }
            DerivativeSet {
                propagator: Propagator(e.x0),
                first: e.d,
                second: Some(second),
            }
        }
    }
}
