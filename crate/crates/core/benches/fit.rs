use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gridclust::synth::{generate, SynthSpec};
use gridclust::{fit_sequential, SearchConfig};

fn restarts(c: &mut Criterion) {
    let data = generate(&SynthSpec::new(2000, 1)).unwrap();
    let config = SearchConfig::with_seed(1);
    let mut group = c.benchmark_group("restarts_m2000");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| fit_sequential(black_box(&data.dataset), &config)));
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| b.iter(|| gridclust::fit_parallel(black_box(&data.dataset), &config)));
    group.finish();
}

fn scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("scaling");
    group.sample_size(10);
    for m in [1_000usize, 10_000, 100_000] {
        let data = generate(&SynthSpec::new(m, 1)).unwrap();
        let config = SearchConfig { vns_restarts: 1, ..SearchConfig::with_seed(1) };
        group.bench_with_input(BenchmarkId::from_parameter(m), &data.dataset, |b, ds| b.iter(|| fit_sequential(ds, &config)));
    }
    group.finish();
}

criterion_group!(benches, restarts, scaling);
criterion_main!(benches);
