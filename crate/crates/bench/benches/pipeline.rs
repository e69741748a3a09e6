//! Kernel benchmarks: Procrustes solve, full alignment, exact kNN, ECDF
//! fit/evaluate, and one SGNS training epoch.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use lsc_bench::{random_embedding, random_matrix, write_cycling_corpus};
use lsc_core::{
    align, build_vocabulary, fit_ecdf, procrustes, train, CorpusStream, LandmarkSelection,
    SgnsConfig,
};

fn bench_procrustes(c: &mut Criterion) {
    let a = random_matrix(500, 50, 1);
    let b = random_matrix(500, 50, 2);
    c.bench_function("procrustes 500x50", |bch| {
        bch.iter(|| procrustes(a.view(), b.view()).unwrap())
    });
}

fn bench_align(c: &mut Criterion) {
    let e1 = random_embedding(1000, 50, 3);
    let e2 = random_embedding(1000, 50, 4);
    c.bench_function("align 1000x50 full intersection", |b| {
        b.iter(|| align(&e1, &e2, &LandmarkSelection::AllIntersection).unwrap())
    });
}

fn bench_knn(c: &mut Criterion) {
    let emb = random_embedding(1000, 50, 5);
    let ids: Vec<usize> = (0..emb.len()).collect();
    c.bench_function("knn k=100 over 1000 vectors", |b| {
        b.iter(|| emb.nearest_neighbors(0, 100, Some(&ids)).unwrap())
    });
}

fn bench_ecdf(c: &mut Criterion) {
    let values: Vec<f64> = random_matrix(100, 100, 6).iter().copied().collect();
    c.bench_function("ecdf fit 10000", |b| b.iter(|| fit_ecdf(&values).unwrap()));
    let ecdf = fit_ecdf(&values).unwrap();
    c.bench_function("ecdf evaluate 10000", |b| {
        b.iter(|| values.iter().map(|&v| ecdf.evaluate(v)).sum::<f64>())
    });
}

fn bench_sgns_epoch(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.txt");
    let tokens = write_cycling_corpus(&path, 500, 12, 100);
    let stream = CorpusStream::open(&path).unwrap();
    let vocab = Arc::new(build_vocabulary(&stream, 1).unwrap());
    let cfg = SgnsConfig {
        dim: 16,
        window: 3,
        epochs: 1,
        min_count: 1,
        seed: 1,
        ..SgnsConfig::default()
    };
    c.bench_function(&format!("sgns epoch {tokens} tokens dim 16"), |b| {
        b.iter(|| train(&stream, vocab.clone(), &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_procrustes,
    bench_align,
    bench_knn,
    bench_ecdf,
    bench_sgns_epoch
);
criterion_main!(benches);
