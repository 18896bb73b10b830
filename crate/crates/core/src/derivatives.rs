// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Per-slice propagator derivatives shared by both backends.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::propagation::Propagator;
use crate::spinops::{Direction, SpinSystem};
use crate::{auxmat, escalade, CMat3};

/// How the directional propagator derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivativeMethod {
    /// Exponentials of block upper-triangular auxiliary matrices.
    Auxmat,
    /// Closed-form Lie-algebraic coefficients, no exponentials.
    Escalade,
}

impl DerivativeMethod {
    pub const ALL: [DerivativeMethod; 2] = [DerivativeMethod::Auxmat, DerivativeMethod::Escalade];

    pub fn name(self) -> &'static str {
        match self {
            DerivativeMethod::Auxmat => "auxmat",
            DerivativeMethod::Escalade => "escalade",
        }
    }
}

impl fmt::Display for DerivativeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DerivativeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "auxmat" => Ok(DerivativeMethod::Auxmat),
            "escalade" => Ok(DerivativeMethod::Escalade),
            other => Err(Error::InvalidArgument(format!(
                "unknown derivative method `{other}` (expected auxmat or escalade)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivativeOrder {
    First,
    Second,
}

/// Index of the unordered pair `{j, k}` in `DerivativeSet::second`:
/// `xx, xy, xz, yy, yz, zz`.
#[inline]
pub fn pair_index(j: Direction, k: Direction) -> usize {
    const TABLE: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    TABLE[j.index()][k.index()]
}

/// Propagator of one slice with its first derivatives `D_k` and, when
/// requested, the six unique second derivatives `D2_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSet {
    pub propagator: Propagator,
    pub first: [CMat3; 3],
    pub second: Option<[CMat3; 6]>,
}

impl DerivativeSet {
    pub fn first(&self, k: Direction) -> &CMat3 {
        &self.first[k.index()]
    }

    pub fn second(&self, j: Direction, k: Direction) -> Option<&CMat3> {
        self.second.as_ref().map(|s| &s[pair_index(j, k)])
    }
}

/// Derivatives of slice `controls` with the chosen backend.
pub fn slice_derivatives(
    method: DerivativeMethod,
    sys: &SpinSystem,
    controls: [f64; 3],
    dt: f64,
    order: DerivativeOrder,
) -> DerivativeSet {
    match method {
        DerivativeMethod::Auxmat => auxmat::auxmat_derivatives(sys, controls, dt, order),
        DerivativeMethod::Escalade => escalade::escalade_derivatives(sys, controls, dt, order),
    }
}
