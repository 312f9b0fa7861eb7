use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jtm_bench::fixture;
use jtm_core::model::{ModelConfig, Variant};
use jtm_core::numerics::{Tape, Tensor};
use jtm_core::poincare::poincare_distance;
use jtm_core::syntactic::build_syntactic_vector;

fn matmul(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul");
    for n in [32usize, 128] {
        let a = Tensor::full(&[n, n], 0.5).unwrap();
        let b = Tensor::full(&[n, n], 0.25).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| {
                let mut t = Tape::new();
                let (x, y) = (t.constant(a.clone()), t.constant(b.clone()));
                black_box(t.matmul(x, y).unwrap());
            })
        });
    }
    g.finish();
}

fn distance(c: &mut Criterion) {
    let a: Vec<f64> = (0..10).map(|i| 0.03 * i as f64).collect();
    let b: Vec<f64> = (0..10).map(|i| -0.02 * i as f64).collect();
    c.bench_function("poincare_distance/10", |bench| {
        bench.iter(|| poincare_distance(black_box(&a), black_box(&b)).unwrap())
    });
}

fn syntactic(c: &mut Criterion) {
    let f = fixture(200, ModelConfig::default()).unwrap();
    let tax = f.model.taxonomy().clone();
    c.bench_function("syntactic_vector/200", |bench| {
        bench.iter(|| build_syntactic_vector(black_box(&f.queries[7]), &tax).unwrap())
    });
}

fn predict(c: &mut Criterion) {
    let mut g = c.benchmark_group("predict_batch64");
    g.sample_size(20);
    for variant in [Variant::Full, Variant::Concat] {
        let cfg = ModelConfig {
            variant,
            d_r: 16,
            ..ModelConfig::default()
        };
        let f = fixture(200, cfg).unwrap();
        let batch = &f.queries[..64];
        g.bench_function(format!("{variant:?}"), |bench| bench.iter(|| f.model.predict(black_box(batch)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, matmul, distance, syntactic, predict);
criterion_main!(benches);
