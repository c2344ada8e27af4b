use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use cci_bench::code_pair;
use cci_core::dataset::preprocess;
use cci_core::diff::{edit_actions_with, DiffScratch};
use cci_core::{diff_code, lex_code};

fn myers(c: &mut Criterion) {
    let mut g = c.benchmark_group("diff_code");
    for len in [32, 128, 512, 2048] {
        let (old, new) = code_pair(len as u64, len, 0.1);
        let (a, b) = (lex_code(&old), lex_code(&new));
        g.throughput(Throughput::Elements(len as u64));
        g.bench_with_input(BenchmarkId::from_parameter(len), &len, |bch, _| {
            bch.iter(|| diff_code(black_box(&a), black_box(&b)))
        });
    }
    g.finish();
}

fn myers_dissimilar(c: &mut Criterion) {
    let mut g = c.benchmark_group("edit_actions_unrelated");
    for len in [64, 256, 1024] {
        let (old, _) = code_pair(1, len, 0.0);
        let (new, _) = code_pair(2, len, 0.0);
        let a: Vec<&str> = old.split(' ').collect();
        let b: Vec<&str> = new.split(' ').collect();
        let mut scratch = DiffScratch::default();
        let mut out = Vec::new();
        g.bench_with_input(BenchmarkId::from_parameter(len), &len, |bch, _| {
            bch.iter(|| {
                edit_actions_with(black_box(&a), black_box(&b), &mut scratch, &mut out);
                out.len()
            })
        });
    }
    g.finish();
}

fn preprocess_batch(c: &mut Criterion) {
    let recs = cci_bench::records(9, 256, 120);
    c.bench_function("preprocess_256x120", |b| b.iter(|| preprocess(black_box(&recs))));
}

criterion_group!(benches, myers, myers_dissimilar, preprocess_batch);
criterion_main!(benches);
