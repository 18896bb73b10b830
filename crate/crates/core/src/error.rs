// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("slice index out of range: ({m}, {n}) with {len} slices")]
    IndexOutOfRange { m: usize, n: usize, len: usize },

    #[error("state vector has zero norm")]
    ZeroNorm,

    #[error("unknown state name `{0}` (expected x, y or z)")]
    UnknownState(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
