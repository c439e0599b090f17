//! Serial against rayon-backed execution on the three parallel hot paths.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyperopinion::regression::fit_ols;
use hyperopinion::seed::rng_from_seed;
use hyperopinion::sweep::{run_cell, SweepConfig};
use hyperopinion::toy::enumerate_absorbing;
use hyperopinion::{Execution, Regime};
use rand::Rng;

const MODES: [(&str, Execution); 2] = [
    ("serial", Execution::Serial),
    ("parallel", Execution::Parallel),
];

fn sweep_cell(c: &mut Criterion) {
    let cfg = SweepConfig {
        betas: vec![0.5],
        qs: vec![0.5],
        runs: 32,
        n: 200,
        timesteps: 50,
        ..SweepConfig::default()
    };
    let mut g = c.benchmark_group("sweep_cell");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_cell(black_box(&cfg), 0, 0, exec).unwrap())
        });
    }
    g.finish();
}

fn toy_enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("toy_enumeration");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| enumerate_absorbing(Regime::Nonlinear, black_box(0.5), exec))
        });
    }
    g.finish();
}

fn least_squares(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let rows: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..120).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().take(10).sum::<f64>())
        .collect();
    let mut g = c.benchmark_group("least_squares");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_ols(black_box(&rows), &y, 1e-8, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sweep_cell, toy_enumeration, least_squares);
criterion_main!(benches);
