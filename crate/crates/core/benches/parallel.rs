use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ghz_core::circuit::{ghz4_state, NoiseParams};
use ghz_core::sampler::{sample_experiment_with, SamplerConfig};
use ghz_core::tomography::{enumerate_settings, fidelity_with_uncertainty, ghz_target};
use ghz_core::{Execution, ResampleConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn sampling(c: &mut Criterion) {
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let settings = enumerate_settings(4).unwrap();
    let cfg = SamplerConfig {
        shots_per_setting: 100_000,
        ..SamplerConfig::default()
    };
    let mut group = c.benchmark_group("sample_81_settings");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sample_experiment_with(exec, black_box(&rho), &settings, &cfg).unwrap())
        });
    }
    group.finish();
}

fn resampling(c: &mut Criterion) {
    let rho = ghz4_state(&NoiseParams::default()).unwrap();
    let settings = enumerate_settings(4).unwrap();
    let records = sample_experiment_with(
        Execution::Sequential,
        &rho,
        &settings,
        &SamplerConfig::default(),
    )
    .unwrap();
    let target = ghz_target(4, 0.0);
    let mut group = c.benchmark_group("tomography_fidelity_100_resamples");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ResampleConfig::new(100, 7).with_exec(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| fidelity_with_uncertainty(black_box(&records), &target, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, resampling);
criterion_main!(benches);
