use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use hcfqkd_bench::{bits, link_fixture, montecarlo_config, sweep_config};
use hcfqkd_core::cow::bob_receive;
use hcfqkd_core::distill::privacy_amplify;
use hcfqkd_core::harness::{run_scenario, run_sweep};

fn toeplitz(c: &mut Criterion) {
    let mut g = c.benchmark_group("privacy_amplify");
    for n in [1usize << 12, 1 << 16] {
        let key = bits(n, 3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &key, |b, key| {
            b.iter(|| privacy_amplify(black_box(key), key.len() / 2, 5).unwrap())
        });
    }
    g.finish();
}

fn analytic_sweep(c: &mut Criterion) {
    let cfg = sweep_config();
    c.bench_function("analytic_sweep", |b| b.iter(|| run_sweep(black_box(&cfg)).unwrap()));
}

fn bob(c: &mut Criterion) {
    let (alice, op) = link_fixture(1000);
    c.bench_function("bob_receive_1000_frames", |b| b.iter(|| bob_receive(black_box(&alice), &op, 1).unwrap()));
}

fn montecarlo_point(c: &mut Criterion) {
    let cfg = montecarlo_config(10_000);
    c.bench_function("montecarlo_point_10000_frames", |b| b.iter(|| run_scenario(black_box(&cfg)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = toeplitz, analytic_sweep, bob, montecarlo_point
}
criterion_main!(benches);
