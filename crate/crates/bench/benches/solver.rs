use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use moreau_bench::{generic_volterra, scenario};
use moreau_core::{filippov, solve_unperturbed, BoundCertificate};
use std::hint::black_box;

fn volterra(c: &mut Criterion) {
    let mut group = c.benchmark_group("volterra-cosine");
    for h in [1e-2, 1e-3] {
        let (fast, grid) = scenario("volterra-cosine", h);
        group.bench_with_input(BenchmarkId::new("separable", h), &h, |b, _| {
            b.iter(|| solve_unperturbed(black_box(&fast), &grid).unwrap())
        });
        let (slow, grid) = generic_volterra(h);
        group.bench_with_input(BenchmarkId::new("generic", h), &h, |b, _| {
            b.iter(|| solve_unperturbed(black_box(&slow), &grid).unwrap())
        });
    }
    group.finish();
}

fn obstacle(c: &mut Criterion) {
    let (problem, grid) = scenario("ball-complement-obstacle", 1e-3);
    c.bench_function("ball-complement-obstacle/solve", |b| {
        b.iter(|| solve_unperturbed(black_box(&problem), &grid).unwrap())
    });
}

fn iteration(c: &mut Criterion) {
    let (problem, grid) = scenario("lipschitz-two-point-F", 1e-3);
    c.bench_function("lipschitz-two-point-F/iterate", |b| {
        b.iter(|| filippov::iterate(black_box(&problem), &grid, 1e-6, 30).unwrap())
    });
}

fn certificate(c: &mut Criterion) {
    let mut group = c.benchmark_group("certificate");
    for name in ["diode-clamp", "ball-F"] {
        let (problem, grid) = scenario(name, 1e-3);
        group.bench_function(name, |b| {
            b.iter(|| BoundCertificate::for_problem(black_box(&problem), &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, volterra, obstacle, iteration, certificate);
criterion_main!(benches);
