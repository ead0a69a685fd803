//! Benchmarks for the hot kernels: tensor contraction, Weyl chain powers,
//! the characteristic-coefficient recursion, the closed-form linear solve,
//! and one end-to-end classification.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cetest_core::catalog;
use cetest_core::conformal::{classify, ClassifyOptions};
use cetest_core::identities::{random_weyl, WeylSampleConfig};
use cetest_core::tensor::{einsum, Tensor, Variance};
use cetest_core::weyl::{characteristic_coefficients, solve_weyl_linear, WeylPoint, MIXED_PAIR};
use cetest_core::{Mode, Scalar};

fn sample(dim: usize) -> WeylPoint {
    let cfg = WeylSampleConfig::lorentzian(dim, 42, Mode::Float);
    random_weyl(&cfg).expect("random Weyl sample")
}

fn bench_einsum(c: &mut Criterion) {
    let w = sample(6);
    let a = w.weyl().clone();
    c.bench_function("einsum chain step n=6", |b| {
        b.iter(|| {
            einsum("abij,ijcd->abcd", &[black_box(&a), black_box(&a)], &MIXED_PAIR).unwrap()
        })
    });
}

fn bench_chain_traces(c: &mut Criterion) {
    let w = sample(6);
    c.bench_function("chain power p=6 n=6", |b| {
        b.iter(|| black_box(&w).chain(6))
    });
    let w5 = sample(5);
    c.bench_function("characteristic coefficients n=5", |b| {
        b.iter(|| characteristic_coefficients(black_box(&w5)))
    });
}

fn bench_linear_solve(c: &mut Criterion) {
    let w = sample(5);
    // Right side H^{ab}_c = C^{ab}_{cd} v^d inherits the required
    // upper-pair antisymmetry from the Weyl tensor.
    let v = Tensor::from_data(
        5,
        vec![Variance::Up],
        (1..=5).map(|i| Scalar::Float(i as f64)).collect(),
    )
    .unwrap();
    let h = einsum(
        "abcd,d->abc",
        &[w.weyl(), &v],
        &[Variance::Up, Variance::Up, Variance::Down],
    )
    .unwrap();
    c.bench_function("closed-form linear solve n=5", |b| {
        b.iter(|| solve_weyl_linear(black_box(&w), black_box(&h)).unwrap())
    });
}

fn bench_classify(c: &mut Criterion) {
    let entry = catalog::find("schwarzschild4").expect("catalog entry");
    let mf = entry.metric_file().expect("parse");
    let spec = mf.to_metric_spec(&entry.name).expect("spec");
    let points = mf.sample_points();
    let options = ClassifyOptions::default();
    let mut group = c.benchmark_group("classify");
    group.sample_size(10);
    group.bench_function("schwarzschild4 end-to-end", |b| {
        b.iter(|| classify(black_box(&spec), black_box(&points), black_box(&options)).unwrap())
    });
    group.finish();
}

criterion_group!(
    kernels,
    bench_einsum,
    bench_chain_traces,
    bench_linear_solve,
    bench_classify
);
criterion_main!(kernels);
