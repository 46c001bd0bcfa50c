use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use transfer_bench::*;
use transfer_core::{coupling_cost, dual_pushforward, wasserstein, CostMode, DiscreteMeasure, MapModel};

fn branch_inversion(c: &mut Criterion) {
    let mut group = c.benchmark_group("inverse_branches");
    let ys = rotation_points(1024, 0.0);
    for (name, map) in [
        ("pm_0.5", MapModel::pm(0.5).unwrap()),
        ("pm_log_1", MapModel::pm_log(1.0).unwrap()),
        ("k_fold_3", MapModel::k_fold(3).unwrap()),
    ] {
        let mut out = vec![0.0; map.k];
        group.bench_function(name, |b| {
            b.iter(|| {
                for &y in &ys {
                    map.inverse_branches_into(black_box(y), &mut out);
                }
                out[0]
            })
        });
    }
    group.finish();
}

fn transfer_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("transfer_apply");
    for n in [1024usize, 4096, 16384] {
        let (_, op) = pm_operator(0.5, n);
        let f = smooth_observable(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| op.apply(black_box(&f)).unwrap())
        });
    }
    group.finish();
}

fn transport(c: &mut Criterion) {
    let spec = holder_02();
    let mut group = c.benchmark_group("wasserstein");
    for n in [6usize, 32, 64] {
        let (mu, nu) = measure_pair(n);
        group.bench_with_input(BenchmarkId::new("assignment", n), &n, |b, _| {
            b.iter(|| wasserstein(black_box(&mu), black_box(&nu), &spec).unwrap().0)
        });
    }
    for n in [64usize, 256] {
        let (mu, nu) = weighted_pair(n);
        group.bench_with_input(BenchmarkId::new("flow", n), &n, |b, _| {
            b.iter(|| wasserstein(black_box(&mu), black_box(&nu), &spec).unwrap().0)
        });
    }
    group.finish();
}

fn pushforward(c: &mut Criterion) {
    let map = MapModel::pm(0.5).unwrap();
    let potential = |x: f64| 0.5 * (TAU * x).cos();
    let mut start = DiscreteMeasure::dirac(0.37);
    for _ in 0..8 {
        start = dual_pushforward(&map, &potential, &start, 0.0).unwrap().normalized();
    }
    let mut group = c.benchmark_group("dual_pushforward_256_atoms");
    for (name, merge) in [("exact", 0.0), ("merge_1/256", 1.0 / 256.0)] {
        group.bench_function(name, |b| {
            b.iter(|| dual_pushforward(&map, &potential, black_box(&start), merge).unwrap())
        });
    }
    group.finish();
}

fn coupling(c: &mut Criterion) {
    let map = MapModel::pm(0.5).unwrap();
    let spec = holder_02();
    let mut group = c.benchmark_group("coupling_cost");
    group.sample_size(20);
    for t in [8usize, 12] {
        group.bench_with_input(BenchmarkId::new("exhaustive", t), &t, |b, &t| {
            b.iter(|| coupling_cost(&map, 0.2, 0.45, t, &spec, CostMode::Exhaustive).unwrap())
        });
    }
    group.bench_function("sampled_t40_4000_words", |b| {
        b.iter(|| {
            coupling_cost(&map, 0.2, 0.45, 40, &spec, CostMode::Sampled { words: 4000, seed: 1 })
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, branch_inversion, transfer_apply, transport, pushforward, coupling);
criterion_main!(benches);
