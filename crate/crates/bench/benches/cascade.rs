//! Cascade simulation and detection throughput.
//!
//! `simulate` is the kinetic Monte Carlo hot loop (one jump chain per
//! excitation cycle); `detect` replays the emitted photons through the
//! per-channel filter, efficiency, and jitter chain. Detector
//! efficiencies are raised far above the physical per-mille values so
//! the detection path is exercised on a meaningful tag volume.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use std::hint::black_box;
use triphoton::cascade::{default_detector_channels, detect};
use triphoton::CascadeModel;

const CYCLES: u64 = 100_000;

fn bench_simulate(c: &mut Criterion) {
    let compiled = CascadeModel::default().compile().unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.throughput(Throughput::Elements(CYCLES));
    group.bench_function("100k_cycles", |b| {
        b.iter(|| compiled.simulate(black_box(CYCLES), 0xCA5C));
    });
    group.finish();
}

fn bench_detect(c: &mut Criterion) {
    let compiled = CascadeModel::default().compile().unwrap();
    let output = compiled.simulate(CYCLES, 0xCA5C);
    let mut channels = default_detector_channels();
    for ch in &mut channels {
        ch.efficiency = 0.5;
    }
    let mut group = c.benchmark_group("detect");
    group.sample_size(10);
    group.throughput(Throughput::Elements(output.stats.photons));
    group.bench_function("100k_cycles", |b| {
        b.iter(|| detect(&compiled, black_box(&output), &channels, 0xCA5C).unwrap());
    });
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_detect);
criterion_main!(benches);
