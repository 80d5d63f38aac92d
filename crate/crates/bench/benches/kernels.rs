use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nls4_bench::{physics, smooth_field};
use nls4_core::ansatz::{build_profile, ProfileConfig};
use nls4_core::geometry::{build_weight_with_edge, CompactSetSpec, Edge};
use nls4_core::params::experiment_params;
use nls4_core::solver::{linear_propagate, nonlinear_substep, SimSession};
use nls4_core::{Grid, Rational, Scheme, SolverConfig};

fn substeps(c: &mut Criterion) {
    let phys = physics();
    let mut group = c.benchmark_group("substep");
    for points in [1024, 4096] {
        let u = smooth_field(points);
        group.bench_with_input(BenchmarkId::new("linear", points), &u, |b, u| {
            b.iter(|| linear_propagate(black_box(u), 1e-4, &phys).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("nonlinear", points), &u, |b, u| {
            b.iter(|| nonlinear_substep(black_box(u), 1e-4, &phys).unwrap())
        });
    }
    group.finish();
}

fn solver_runs(c: &mut Criterion) {
    let phys = physics();
    let u = smooth_field(1024);
    let mut group = c.benchmark_group("run_to_0.01");
    group.sample_size(10);
    for scheme in [Scheme::StrangSplit, Scheme::Etdrk4] {
        group.bench_function(format!("{scheme:?}"), |b| {
            b.iter(|| {
                let cfg = SolverConfig::new(scheme, 1e-5, 0.0, 0.01);
                let mut s = SimSession::new(phys, cfg, u.clone(), vec![], None).unwrap();
                s.run().unwrap();
                s.stats.accepted
            })
        });
    }
    group.finish();
}

fn ansatz(c: &mut Criterion) {
    let grid = Grid::new(1, 1024, 1.6).unwrap();
    let spec = CompactSetSpec::point(&[0.0], 0.2);
    c.bench_function("weight_k40_1024", |b| {
        b.iter(|| build_weight_with_edge(black_box(&spec), 40, &grid, Edge::Periodic).unwrap())
    });
    let weight = build_weight_with_edge(&spec, 40, &grid, Edge::Periodic).unwrap();
    let base = nls4_core::PhysParams::new(
        Rational::from_integer(2),
        nls4_core::Complex64::new(0.0, -1.0),
        0,
        1,
    )
    .unwrap();
    let params = experiment_params(1, 40, 2.0, Rational::new(1, 10), &base).unwrap();
    let cfg = ProfileConfig {
        s_max: 0.5,
        ..ProfileConfig::default()
    };
    let mut group = c.benchmark_group("profile");
    group.sample_size(10);
    group.bench_function("J1_k40_1024", |b| b.iter(|| build_profile(&params, &weight, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, substeps, solver_runs, ansatz);
criterion_main!(benches);
