// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact Newton-Raphson GRAPE for ensembles of two-level systems.
//!
//! States live in the three-dimensional rank-1 spherical-tensor block of the
//! Liouville space of a spin-1/2, ordered `(T_{1,+1}, T_{1,0}, T_{1,-1})`.
//! Control pulses are piecewise constant with `x`, `y` and `z` channels.
//!
//! The crate provides two exact routes to the slice-propagator derivatives
//! ([`auxmat`] through block-triangular matrix exponentials and [`escalade`]
//! through closed-form Lie-algebraic coefficients), two Hessian assemblies
//! ([`fidelity::hessian_standard`] with a per-pair central propagator and
//! [`fidelity::hessian_accelerated`] with a single derivative-trajectory
//! product per row), an offset [`ensemble`] and a Newton [`optimizer`].

pub mod auxmat;
pub mod derivatives;
pub mod ensemble;
pub mod error;
pub mod escalade;
pub mod expm;
pub mod fidelity;
pub mod optimizer;
pub mod propagation;
pub mod spinops;

pub use derivatives::{DerivativeMethod, DerivativeOrder, DerivativeSet};
pub use ensemble::{ensemble_objective, uniform_band, Ensemble, Want};
pub use error::{Error, Result};
pub use fidelity::{HessianMode, ObjectiveReport, PropagationCount};
pub use optimizer::{optimize, OptimizerConfig, Problem, Regularization};
pub use propagation::{Propagator, TrajectoryMatrix};
pub use spinops::{
    named_state, random_pulse, standard_generators, ControlPulse, Direction, Generators,
    NamedState, SpinSystem, StateVector,
};

pub use nalgebra::{DMatrix, DVector};

pub type C64 = nalgebra::Complex<f64>;
pub type CMat3 = nalgebra::Matrix3<C64>;
pub type CVec3 = nalgebra::Vector3<C64>;
