use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dsi_core::analytic::min_lookahead;
use dsi_core::harness::{sweep, SweepSpec};
use dsi_core::offline::{simulate_dsi_with, simulate_si_with};
use dsi_core::{AcceptanceModel, ForwardProfile, SimConfig, SimOptions, SimRng};

fn offline(c: &mut Criterion) {
    let target = ForwardProfile::uniform(1.0).unwrap();
    let mut group = c.benchmark_group("offline");
    for &drafter_ms in &[0.05, 0.3] {
        let drafter = ForwardProfile::uniform(drafter_ms).unwrap();
        let k = min_lookahead(1.0, drafter_ms, 7);
        let cfg = SimConfig::new(1000, k, 7, 0, 1).unwrap();
        let model = AcceptanceModel::new(0.7).unwrap();
        group.bench_with_input(BenchmarkId::new("si", drafter_ms), &cfg, |b, cfg| {
            b.iter(|| {
                let mut rng = SimRng::from_seed(1);
                black_box(simulate_si_with(&target, &drafter, cfg, &model, &mut rng, SimOptions::quiet()))
            })
        });
        group.bench_with_input(BenchmarkId::new("dsi", drafter_ms), &cfg, |b, cfg| {
            b.iter(|| {
                let mut rng = SimRng::from_seed(1);
                black_box(simulate_dsi_with(&target, &drafter, cfg, &model, &mut rng, SimOptions::quiet()))
            })
        });
    }
    group.finish();
}

fn small_sweep(c: &mut Criterion) {
    let spec = SweepSpec {
        drafter_latency_grid: vec![0.1, 0.4, 0.7, 1.0],
        acceptance_grid: vec![0.0, 0.3, 0.6, 0.9],
        lookahead_grid: vec![1, 2, 4, 8],
        sp_cap: 7,
        n_tokens: 100,
        repeats: 5,
        seed: 0,
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("4x4", |b| b.iter(|| black_box(sweep(&spec).unwrap())));
    group.finish();
}

criterion_group!(benches, offline, small_sweep);
criterion_main!(benches);
