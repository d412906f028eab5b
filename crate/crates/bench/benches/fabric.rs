use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fabric_bench::{barrier_fabric, moving_state, total_energy_system, tree_generator};
use fabric_core::energization::Variant;
use fabric_core::simulation::{rollout, step_rk4};
use fabric_core::SecondOrderSystem;

fn energize(c: &mut Criterion) {
    let s = moving_state();
    let mut g = c.benchmark_group("energize");
    for (name, variant) in [("exact", Variant::Exact), ("robust", Variant::default())] {
        let fabric = barrier_fabric(variant);
        g.bench_function(name, |b| b.iter(|| fabric.accel(black_box(&s)).unwrap()));
    }
    g.finish();
}

fn tree(c: &mut Criterion) {
    let s = moving_state();
    let mut g = c.benchmark_group("tree_generator");
    for n in [1, 4, 16] {
        let generator = tree_generator(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| generator.accel(black_box(&s)).unwrap()));
    }
    g.finish();
}

fn integrate(c: &mut Criterion) {
    let s = moving_state();
    let fabric = barrier_fabric(Variant::Exact);
    c.bench_function("rk4_step", |b| b.iter(|| step_rk4(&fabric, black_box(&s), 1e-3).unwrap()));

    let (sys, energy, psi) = total_energy_system();
    let mut g = c.benchmark_group("rollout");
    g.sample_size(10);
    g.bench_function("total_energy_1s", |b| {
        b.iter(|| rollout(&sys, black_box(&s), 1e-3, 1.0, Some(energy.as_ref()), Some(psi.as_ref()), None).unwrap())
    });
    g.finish();
}

criterion_group!(benches, energize, tree, integrate);
criterion_main!(benches);
