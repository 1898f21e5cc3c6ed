use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sparsest_core::generate::{generate, Family};
use sparsest_core::oracle::exact_sparsest_cut;
use sparsest_core::{formulate, round, solve, SolverOptions};

const SIZES: [usize; 3] = [6, 10, 14];

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for family in Family::ALL {
        for n in SIZES {
            let problem = formulate(&generate(family, n, 1).unwrap()).unwrap();
            group.bench_with_input(BenchmarkId::new(family.name(), n), &problem, |b, p| {
                b.iter(|| solve(black_box(p), &SolverOptions::default()).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_round(c: &mut Criterion) {
    let mut group = c.benchmark_group("round");
    for n in SIZES {
        let g = generate(Family::Uniform, n, 1).unwrap();
        let x = solve(&formulate(&g).unwrap(), &SolverOptions::default())
            .unwrap()
            .configuration
            .vectors;
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| round(black_box(x), &g).unwrap())
        });
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_sparsest_cut");
    group.sample_size(10);
    for n in SIZES {
        let g = generate(Family::Uniform, n, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| exact_sparsest_cut(black_box(g)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve, bench_round, bench_oracle);
criterion_main!(benches);
