//! Sequential vs rayon execution of the data-parallel inner loops:
//! one co-training epoch, batch inference, and memorization scoring.
//!
//! Run with `cargo bench -p cct`. Both paths produce bit-identical results;
//! this suite only compares wall time.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cct::data::{gen_gaussian_clusters, inject_noise, split, NoiseKind, NoiseSpec};
use cct::exec::Parallelism;
use cct::train::{memorization_rate_with, predict_dataset_with, train_with, TrainConfig};

fn setup() -> (TrainConfig, cct::Dataset, cct::Dataset) {
    let base = gen_gaussian_clusters(4, 2, 1500, 1.0, 9).unwrap();
    let (train, val, _) = split(&base, (0.8, 0.2, 0.0), 7).unwrap();
    let noise = NoiseSpec { kind: NoiseKind::Symmetric, rate: 0.4, pair_map: None, seed: 3 };
    let train = inject_noise(&train, &noise).unwrap();
    let cfg = TrainConfig {
        networks: 3,
        arch: vec![2, 16, 16, 4],
        epochs: 1,
        ramp_epochs: 1,
        batch_size: 64,
        seed: 11,
        ..TrainConfig::default()
    };
    (cfg, train, val)
}

fn bench_train_epoch(c: &mut Criterion) {
    let (cfg, train, val) = setup();
    let mut group = c.benchmark_group("train_epoch");
    for (name, par) in [
        ("sequential", Parallelism::Sequential),
        ("rayon", Parallelism::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            b.iter(|| train_with(&cfg, &train, &val, None, par).unwrap());
        });
    }
    group.finish();
}

fn bench_batch_inference(c: &mut Criterion) {
    let (cfg, train, val) = setup();
    let outcome = train_with(&cfg, &train, &val, None, Parallelism::Sequential).unwrap();
    let big = gen_gaussian_clusters(4, 2, 5000, 1.0, 21).unwrap();

    let mut group = c.benchmark_group("predict_dataset_20k");
    for (name, par) in [
        ("sequential", Parallelism::Sequential),
        ("rayon", Parallelism::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            b.iter(|| predict_dataset_with(&outcome.ensemble, &big, par).unwrap());
        });
    }
    group.finish();

    let mut group = c.benchmark_group("memorization_rate");
    for (name, par) in [
        ("sequential", Parallelism::Sequential),
        ("rayon", Parallelism::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            b.iter(|| memorization_rate_with(&outcome.ensemble, &train, par).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, bench_train_epoch, bench_batch_inference);
criterion_main!(benches);
