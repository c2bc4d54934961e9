use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rcn_bench::{padded_system, reservoir, sine};
use rcn_core::numerics::{ridge_solve, spectral_norm};
use rcn_core::reservoir::harvest;
use rcn_core::{reduce, Matrix, RankTolerance};
use std::hint::black_box;

fn bench_reduce(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduce");
    for d in [5, 10, 20] {
        let r = padded_system(d, d / 2, d as u64);
        group.bench_with_input(BenchmarkId::from_parameter(r.dim), &r, |b, r| {
            b.iter(|| reduce(black_box(r), RankTolerance::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_spectral_norm(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_norm");
    for n in [50, 200] {
        let a = reservoir(n, 1).weight_a;
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| spectral_norm(black_box(a)))
        });
    }
    group.finish();
}

fn bench_ridge(c: &mut Criterion) {
    let x = Matrix::from_fn(2000, 101, |i, j| {
        ((i * 31 + j * 17) % 97) as f64 / 97.0 - 0.5
    });
    let y = Matrix::from_fn(2000, 1, |i, _| (i as f64 * 0.01).cos());
    c.bench_function("ridge_solve/2000x101", |b| {
        b.iter(|| ridge_solve(black_box(&x), black_box(&y), 1e-8).unwrap())
    });
}

fn bench_harvest(c: &mut Criterion) {
    let net = reservoir(200, 2);
    let inputs = sine(2000);
    c.bench_function("harvest/200x2000", |b| {
        b.iter(|| harvest(black_box(&net), black_box(&inputs), 0, None).unwrap())
    });
}

criterion_group!(
    benches,
    bench_reduce,
    bench_spectral_norm,
    bench_ridge,
    bench_harvest
);
criterion_main!(benches);
