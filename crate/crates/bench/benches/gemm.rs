use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use cpuformer_bench::operands;
use cpuformer_core::{gemm_blocked, gemm_naive, PartitionParams, TransposeMode};

fn bench_forms(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm_forms");
    group.sample_size(10);
    for &(m, k, n) in &[(8usize, 768usize, 768usize), (64, 768, 768), (64, 768, 3072)] {
        let (a, b) = operands(m, k, n, 1);
        let bt = b.transpose();
        let id = format!("{m}x{k}x{n}");
        group.bench_with_input(BenchmarkId::new("nn", &id), &(), |bench, _| {
            bench.iter(|| {
                gemm_blocked(
                    black_box(&a),
                    black_box(&b),
                    TransposeMode::NN,
                    PartitionParams::baseline(),
                    1,
                )
                .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("nt", &id), &(), |bench, _| {
            bench.iter(|| {
                gemm_blocked(
                    black_box(&a),
                    black_box(&bt),
                    TransposeMode::NT,
                    PartitionParams::baseline(),
                    1,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_partition(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm_partition_bk");
    group.sample_size(10);
    let (a, b) = operands(64, 768, 768, 2);
    for &bk in &[16usize, 64, 128, 384] {
        let params = PartitionParams::new(64, 64, bk).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(bk), &(), |bench, _| {
            bench.iter(|| {
                gemm_blocked(black_box(&a), black_box(&b), TransposeMode::NN, params, 1).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_naive(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm_naive");
    group.sample_size(10);
    let (a, b) = operands(64, 768, 768, 3);
    group.bench_function("64x768x768", |bench| {
        bench.iter(|| gemm_naive(black_box(&a), black_box(&b), TransposeMode::NN).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_forms, bench_partition, bench_naive);
criterion_main!(benches);
