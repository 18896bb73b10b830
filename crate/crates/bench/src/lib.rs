// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for `lvgrape`; see `benches/`. The full timing
//! sweeps are `lvgrape benchmark` in the cli crate.
