// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lvgrape::derivatives::slice_derivatives;
use lvgrape::expm::expm;
use lvgrape::propagation::slice_propagator;
use lvgrape::{CMat3, DerivativeMethod, DerivativeOrder, SpinSystem};

fn per_slice(c: &mut Criterion) {
    let sys = SpinSystem::new(2.0 * std::f64::consts::PI * 120.0).unwrap();
    let controls = [3100.0, -4200.0, 800.0];
    let dt = 7.8125e-6;
    let mut g = c.benchmark_group("slice");
    g.bench_function("propagator_wigner", |b| {
        b.iter(|| slice_propagator(&sys, black_box(controls), dt))
    });
    let l: CMat3 = sys.liouvillian(controls) * lvgrape::C64::new(0.0, -dt);
    g.bench_function("propagator_expm", |b| {
        b.iter(|| expm(black_box(&l)).unwrap())
    });
    for method in DerivativeMethod::ALL {
        for (order, label) in [
            (DerivativeOrder::First, "first"),
            (DerivativeOrder::Second, "second"),
        ] {
            g.bench_function(format!("{method}_{label}"), |b| {
                b.iter(|| slice_derivatives(method, &sys, black_box(controls), dt, order))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, per_slice);
criterion_main!(benches);
