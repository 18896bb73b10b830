// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense matrix exponential by Padé approximation with scaling and squaring.
//!
//! The degree is chosen from the exact 1-norm using the backward-error
//! thresholds of Higham (2005): degrees 3, 5, 7, 9 are used without scaling
//! when the norm allows it, otherwise degree 13 with `s` squarings.
//! Matrices here are small (3x3 propagators, 6x6 and 9x9 auxiliary blocks)
//! so everything is stack allocated.

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::{CMat3, C64};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

type Square<const N: usize> = SMatrix<C64, N, N>;

/// Operations the Padé evaluation needs. Implemented for dense square
/// matrices and for [`Jet`].
pub(crate) trait PadeAlgebra: Copy {
    fn identity() -> Self;
    fn zero() -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// `self + s o`
    fn add_scaled(&self, s: f64, o: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    /// 1-norm of the represented matrix.
    fn one_norm(&self) -> f64;
    /// `q^{-1} p`
    fn solve(q: Self, p: Self) -> Self;
}

impl<const N: usize> PadeAlgebra for Square<N> {
    fn identity() -> Self {
        Square::<N>::identity()
    }
    fn zero() -> Self {
        Square::<N>::zeros()
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn add_scaled(&self, s: f64, o: &Self) -> Self {
        self + o * C64::from(s)
    }
    fn scale(&self, s: f64) -> Self {
        self * C64::from(s)
    }
    fn one_norm(&self) -> f64 {
        one_norm(self)
    }
    fn solve(q: Self, p: Self) -> Self {
        solve(q, p)
    }
}

/// Block upper-triangular Toeplitz matrix with 3x3 blocks,
///
/// ```text
/// [[X0, X1, X2], [0, X0, X1], [0, 0, X0]]   (K = 3)
/// ```
///
/// equivalently the truncated series `X0 + e X1 + e^2 X2` with `e^K = 0`.
/// Products need `K(K+1)/2` block products instead of `K^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const K: usize>(pub [CMat3; K]);

impl<const K: usize> PadeAlgebra for Jet<K> {
    fn identity() -> Self {
        let mut b = [CMat3::zeros(); K];
        b[0] = CMat3::identity();
        Jet(b)
    }
    fn zero() -> Self {
        Jet([CMat3::zeros(); K])
    }
    fn mul(&self, o: &Self) -> Self {
        let mut out = [CMat3::zeros(); K];
        for (l, z) in out.iter_mut().enumerate() {
            for i in 0..=l {
                *z += self.0[i] * o.0[l - i];
            }
        }
        Jet(out)
    }
    fn add_scaled(&self, s: f64, o: &Self) -> Self {
        let s = C64::from(s);
        let mut out = self.0;
        for (z, b) in out.iter_mut().zip(&o.0) {
            *z += b * s;
        }
        Jet(out)
    }
    fn scale(&self, s: f64) -> Self {
        Jet(self.0.map(|b| b * C64::from(s)))
    }
    fn one_norm(&self) -> f64 {
        // the last block column holds every block once
        (0..3)
            .map(|c| {
                self.0
                    .iter()
                    .map(|b| b.column(c).iter().map(|z| z.norm()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
    fn solve(q: Self, p: Self) -> Self {
        let inv = inverse3(&q.0[0]);
        let mut x = [CMat3::zeros(); K];
        for l in 0..K {
            let mut rhs = p.0[l];
            for i in 1..=l {
                rhs -= q.0[i] * x[l - i];
            }
            x[l] = inv * rhs;
        }
        Jet(x)
    }
}

/// `exp(a)`; fails on non-finite input.
pub fn expm<const N: usize>(a: &Square<N>) -> Result<Square<N>> {
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    Ok(expm_unchecked(a))
}

pub(crate) fn one_norm<const N: usize>(a: &Square<N>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn expm_unchecked<T: PadeAlgebra>(a: &T) -> T {
    let norm = a.one_norm();
    let id = T::identity();
    if norm == 0.0 {
        return id;
    }
    let a2 = a.mul(a);
    if norm <= THETA_3 {
        return pade_low(a, &[id, a2], &B3);
    }
    let a4 = a2.mul(&a2);
    if norm <= THETA_5 {
        return pade_low(a, &[id, a2, a4], &B5);
    }
    let a6 = a4.mul(&a2);
    if norm <= THETA_7 {
        return pade_low(a, &[id, a2, a4, a6], &B7);
    }
    if norm <= THETA_9 {
        let a8 = a4.mul(&a4);
        return pade_low(a, &[id, a2, a4, a6, a8], &B9);
    }

    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scale = 0.5f64.powi(s);
    let a = a.scale(scale);
    let a2 = a2.scale(scale * scale);
    let a4 = a2.mul(&a2);
    let a6 = a4.mul(&a2);
    let b = B13;

    let inner_u = a6.scale(b[13]).add_scaled(b[11], &a4).add_scaled(b[9], &a2);
    let u = a.mul(
        &a6.mul(&inner_u)
            .add_scaled(b[7], &a6)
            .add_scaled(b[5], &a4)
            .add_scaled(b[3], &a2)
            .add_scaled(b[1], &id),
    );
    let inner_v = a6.scale(b[12]).add_scaled(b[10], &a4).add_scaled(b[8], &a2);
    let v = a6
        .mul(&inner_v)
        .add_scaled(b[6], &a6)
        .add_scaled(b[4], &a4)
        .add_scaled(b[2], &a2)
        .add_scaled(b[0], &id);

    let mut r = T::solve(v.add_scaled(-1.0, &u), v.add_scaled(1.0, &u));
    for _ in 0..s {
        r = r.mul(&r);
    }
    r
}

/// Degrees 3..9: `powers` holds `I, A^2, A^4, ...`.
fn pade_low<T: PadeAlgebra>(a: &T, powers: &[T], b: &[f64]) -> T {
    let mut odd = T::zero();
    let mut even = T::zero();
    for (p, pow) in powers.iter().enumerate() {
        even = even.add_scaled(b[2 * p], pow);
        odd = odd.add_scaled(b[2 * p + 1], pow);
    }
    let u = a.mul(&odd);
    T::solve(even.add_scaled(-1.0, &u), even.add_scaled(1.0, &u))
}

/// Inverse of a (well-conditioned) 3x3 Padé denominator block.
pub(crate) fn inverse3(q: &CMat3) -> CMat3 {
    solve(*q, CMat3::identity())
}

/// Solves `q x = p` by Gaussian elimination with partial pivoting.
fn solve<const N: usize>(mut q: Square<N>, mut p: Square<N>) -> Square<N> {
    for col in 0..N {
        let mut piv = col;
        let mut best = q[(col, col)].norm();
        for row in col + 1..N {
            let v = q[(row, col)].norm();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if piv != col {
            q.swap_rows(col, piv);
            p.swap_rows(col, piv);
        }
        let inv = q[(col, col)].inv();
        for row in col + 1..N {
            let f = q[(row, col)] * inv;
            if f == C64::from(0.0) {
                continue;
            }
            for c in col..N {
                let t = q[(col, c)];
                q[(row, c)] -= f * t;
            }
            for c in 0..N {
                let t = p[(col, c)];
                p[(row, c)] -= f * t;
            }
        }
    }
    for col in (0..N).rev() {
        let inv = q[(col, col)].inv();
        for c in 0..N {
            p[(col, c)] *= inv;
        }
        for row in 0..col {
            let f = q[(row, col)];
            if f == C64::from(0.0) {
                continue;
            }
            for c in 0..N {
                let t = p[(col, c)];
                p[(row, c)] -= f * t;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs<const N: usize>(m: &Square<N>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Taylor series with exact halving and squaring; independent of the
    /// Padé path.
    fn taylor_oracle<const N: usize>(a: &Square<N>) -> Square<N> {
        let s = (one_norm(a).max(1e-300).log2().ceil() + 4.0).max(0.0) as i32;
        let a = a * C64::from(0.5f64.powi(s));
        let mut term = Square::<N>::identity();
        let mut sum = term;
        for k in 1..40 {
            term = term * a * C64::from(1.0 / k as f64);
            sum += term;
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }

    fn random_matrix<const N: usize>(rng: &mut ChaCha8Rng, scale: f64) -> Square<N> {
        Square::<N>::from_fn(|_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        })
    }

    #[test]
    fn zero_gives_identity() {
        assert_eq!(expm(&Matrix3::<C64>::zeros()).unwrap(), Matrix3::identity());
    }

    #[test]
    fn diagonal_phase_matrix() {
        let th = 0.7;
        let a = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::new(0.0, th),
            C64::from(0.0),
            C64::new(0.0, -th),
        ));
        let e = expm(&a).unwrap();
        let want = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            C64::new(0.0, th).exp(),
            C64::from(1.0),
            C64::new(0.0, -th).exp(),
        ));
        assert!(max_abs(&(e - want)) <= 1e-15);
    }

    #[test]
    fn skew_hermitian_gives_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for scale in [1e-3, 0.1, 1.0, 3.0] {
            let a: Square<3> = random_matrix(&mut rng, scale);
            let a = a - a.adjoint();
            let e = expm(&a).unwrap();
            let u = e.adjoint() * e - Square::<3>::identity();
            assert!(max_abs(&u) <= 1e-13, "scale {scale}: {}", max_abs(&u));
        }
    }

    #[test]
    fn matches_taylor_oracle_across_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // norms chosen to hit every Padé degree, including the scaled branch
        for scale in [1e-4, 1e-2, 0.05, 0.15, 0.4, 1.0, 3.0] {
            let a3: Square<3> = random_matrix(&mut rng, scale);
            let rel =
                max_abs(&(expm(&a3).unwrap() - taylor_oracle(&a3))) / max_abs(&taylor_oracle(&a3));
            // both sides round in their squaring phase
            assert!(rel <= 5e-14, "3x3 scale {scale}: {rel}");
            let a9: Square<9> = random_matrix(&mut rng, scale / 3.0);
            let rel =
                max_abs(&(expm(&a9).unwrap() - taylor_oracle(&a9))) / max_abs(&taylor_oracle(&a9));
            assert!(rel <= 1e-13, "9x9 scale {scale}: {rel}");
        }
    }

    #[test]
    fn jet_matches_dense_block_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for scale in [1e-3, 0.05, 0.3, 1.0, 2.5] {
            let blocks: [CMat3; 3] = [0; 3].map(|_| random_matrix(&mut rng, scale / 3.0));
            let mut dense = Square::<9>::zeros();
            for r in 0..3 {
                for c in r..3 {
                    dense
                        .fixed_view_mut::<3, 3>(3 * r, 3 * c)
                        .copy_from(&blocks[c - r]);
                }
            }
            let jet = expm_unchecked(&Jet(blocks));
            let full = expm(&dense).unwrap();
            assert!((Jet(blocks).one_norm() - one_norm(&dense)).abs() <= 1e-15 * one_norm(&dense));
            for l in 0..3 {
                let want = full.fixed_view::<3, 3>(0, 3 * l).into_owned();
                let err = max_abs(&(jet.0[l] - want)) / max_abs(&full);
                assert!(err <= 1e-14, "scale {scale} block {l}: {err}");
            }
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = Matrix3::<C64>::zeros();
        a[(1, 2)] = C64::new(f64::NAN, 0.0);
        assert!(expm(&a).is_err());
    }
}
