use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use projinv::cochain::{random_family, verify_contraction, COCHAIN_POINTS};
use projinv::descriptor::{mc_descriptor, GaussianBlobs};
use projinv::verify::generating_set_invariance;
use projinv::{Execution, TrialConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn invariance(c: &mut Criterion) {
    let mut group = c.benchmark_group("generating_set_invariance");
    group.sample_size(10);
    for (name, exec) in MODES {
        let tc = TrialConfig::new(1000, 7, 0.2).with_exec(exec);
        group.bench_with_input(BenchmarkId::new(name, 6), &tc, |b, tc| {
            b.iter(|| generating_set_invariance(6, tc, 1e-8))
        });
    }
    group.finish();
}

fn contraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_contraction");
    group.sample_size(10);
    for (name, exec) in MODES {
        let tc = TrialConfig::new(100, 7, 0.2).with_exec(exec);
        group.bench_with_input(BenchmarkId::new(name, 3), &tc, |b, tc| {
            b.iter(|| verify_contraction(3, COCHAIN_POINTS, tc, 1e-7, random_family))
        });
    }
    group.finish();
}

fn descriptor(c: &mut Criterion) {
    let img = GaussianBlobs::test_pattern(256, 256).rasterize(256, 256).unwrap();
    let mut group = c.benchmark_group("mc_descriptor");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 4), |b| {
            b.iter(|| mc_descriptor(&img, 4, 20_000, 7, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, invariance, contraction, descriptor);
criterion_main!(benches);
