use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use subgpr::data::synthetic_regression;
use subgpr::{ExactGpr, KernelSpec, NystromModel, SubsampleModel, Truth};

fn fit_and_predict(c: &mut Criterion) {
    let data = synthetic_regression(Truth::Sin2Pi, 4000, 0.1, 2, 1).unwrap().data;
    let kernel = KernelSpec::gaussian(1.0);
    let lambda = 0.01 / data.n() as f64;
    let x_star = [0.1, -0.2];

    let mut group = c.benchmark_group("subsample");
    for s in [32, 128, 512] {
        group.bench_with_input(BenchmarkId::new("fit", s), &s, |b, &s| {
            b.iter(|| SubsampleModel::fit(&data, kernel, lambda, s, 7).unwrap())
        });
        let model = SubsampleModel::fit(&data, kernel, lambda, s, 7).unwrap();
        group.bench_with_input(BenchmarkId::new("predict", s), &s, |b, _| {
            b.iter(|| model.predict(black_box(&x_star)).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("baseline");
    group.sample_size(10);
    for m in [40, 160] {
        group.bench_with_input(BenchmarkId::new("nystrom_fit", m), &m, |b, &m| {
            b.iter(|| NystromModel::fit(&data, kernel, 0.01, m, 7).unwrap())
        });
    }
    let small = data.select(&(0..1000).collect::<Vec<_>>()).unwrap();
    group.bench_function("exact_fit_n1000", |b| {
        b.iter(|| ExactGpr::fit(&small, kernel, 0.01).unwrap().noise_variance())
    });
    group.finish();
}

criterion_group!(benches, fit_and_predict);
criterion_main!(benches);
