use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use swapout::{
    apply_swap, delta_of_swap, evaluate, local_search, solve_exact, CenterId, SearchConfig, SeedPolicy, SwapMove,
};
use swapout_bench::{kcluster, prefix};

fn evaluation(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate");
    for n in [200, 2000] {
        let inst = kcluster(n, 50, 10, n / 20, 1.0, 1);
        let open = prefix(10);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evaluate(&inst, black_box(&open)).unwrap())
        });
    }
    g.finish();
}

fn incremental(c: &mut Criterion) {
    let inst = kcluster(2000, 50, 10, 100, 1.0, 2);
    let sol = evaluate(&inst, &prefix(10)).unwrap();
    let mv = SwapMove::new(vec![CenterId(20), CenterId(30)], vec![CenterId(3), CenterId(7)]);
    c.bench_function("delta_of_swap/2000", |b| {
        b.iter(|| delta_of_swap(&inst, &sol, black_box(&mv)).unwrap())
    });
    c.bench_function("apply_swap/2000", |b| {
        b.iter(|| apply_swap(&inst, &sol, black_box(&mv)).unwrap())
    });
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("local_search");
    g.sample_size(10);
    let inst = kcluster(300, 30, 5, 15, 2.0, 3);
    for rho in [1, 2] {
        let cfg = SearchConfig {
            rho,
            seed: SeedPolicy::Random(7),
            ..SearchConfig::default()
        };
        g.bench_with_input(BenchmarkId::new("rho", rho), &rho, |b, _| {
            b.iter(|| local_search(&inst, &cfg).unwrap())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_exact");
    g.sample_size(10);
    let inst = kcluster(60, 16, 4, 5, 1.0, 4);
    g.bench_function("m16_k4", |b| b.iter(|| solve_exact(&inst, None).unwrap()));
    g.finish();
}

criterion_group!(benches, evaluation, incremental, search, oracle);
criterion_main!(benches);
