use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qlam::{default_pauli_pool, loss_and_grad, ShotConfig, StateVector};
use qlam_bench::{model, tokens};
use std::hint::black_box;

fn gates(c: &mut Criterion) {
    let mut g = c.benchmark_group("gates");
    for n in [4usize, 8, 12] {
        let mut s = StateVector::zero(n).unwrap();
        g.bench_with_input(BenchmarkId::new("ry", n), &n, |b, &n| {
            b.iter(|| s.apply_ry(black_box(n / 2), black_box(0.3)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("rz", n), &n, |b, &n| {
            b.iter(|| s.apply_rz(black_box(n - 1), black_box(0.3)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("cnot", n), &n, |b, &n| {
            b.iter(|| s.apply_cnot(black_box(0), black_box(n - 1)).unwrap())
        });
        let pool = default_pauli_pool(n).unwrap();
        g.bench_with_input(BenchmarkId::new("pool_expectations", n), &n, |b, _| {
            b.iter(|| pool.iter().map(|p| p.expectation(&s).unwrap()).sum::<f64>())
        });
    }
    g.finish();
}

fn cell(c: &mut Criterion) {
    let mut g = c.benchmark_group("cell");
    g.sample_size(20);
    for t in [64usize, 256] {
        let m = model(4, t, 1);
        let x = tokens(t, 2);
        g.bench_with_input(BenchmarkId::new("forward", t), &t, |b, _| {
            b.iter(|| m.forward(black_box(&x), &ShotConfig::exact(), 0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("loss_and_grad", t), &t, |b, _| {
            b.iter(|| loss_and_grad(&m, black_box(&x), 3).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, gates, cell);
criterion_main!(benches);
