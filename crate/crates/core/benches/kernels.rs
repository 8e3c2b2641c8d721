//! Compares each hot kernel on a one-thread pool against the default pool.
//! Build with `--no-default-features` to measure the sequential fallback.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pdfsift_core::analytics::kmeans;
use pdfsift_core::learner::{fit_logistic, score_all, DEFAULT_L2_LAMBDA};
use pdfsift_core::projection::{tsne, TsneParams};
use pdfsift_core::text::featurize_corpus;
use pdfsift_core::{par, synth};

fn pools() -> Vec<(String, usize)> {
    let mode = if cfg!(feature = "parallel") { "rayon" } else { "sequential" };
    // At least two threads so single-core hosts still show pool overhead.
    let wide = par::current_threads().max(2);
    vec![(format!("{mode}-1"), 1), (format!("{mode}-{wide}"), wide)]
}

fn bench_kmeans(c: &mut Criterion) {
    let (data, _) = synth::gaussian_blobs(8, 500, 64, 1.0, 10.0, 1);
    let mut group = c.benchmark_group("kmeans_4000x64_k8");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || kmeans(black_box(&data), 8, 7, 100).unwrap()))
        });
    }
    group.finish();
}

fn bench_tsne(c: &mut Criterion) {
    let (data, _) = synth::gaussian_blobs(4, 100, 32, 1.0, 8.0, 2);
    let params = TsneParams { iterations: 300, ..Default::default() };
    let mut group = c.benchmark_group("tsne_400x32_300it");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || tsne(black_box(&data), &params).unwrap()))
        });
    }
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let store = synth::separable_store(200_000, 1_000, 128, 3);
    let xs: Vec<Vec<f64>> = (0..40)
        .map(|i| store.row(if i % 2 == 0 { i } else { 150_000 + i }).iter().map(|&v| v as f64).collect())
        .collect();
    let targets: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let model = fit_logistic(&xs, &targets, DEFAULT_L2_LAMBDA);
    let mut group = c.benchmark_group("score_all_200000x128");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || score_all(black_box(&model), &store, 4096).unwrap()))
        });
    }
    group.finish();
}

fn bench_tfidf(c: &mut Criterion) {
    let (docs, _) = synth::two_topic_docs(2_000, 300, 4);
    let mut group = c.benchmark_group("tfidf_4000_docs");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || featurize_corpus(black_box(&docs), 1).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_kmeans, bench_tsne, bench_scoring, bench_tfidf);
criterion_main!(benches);
