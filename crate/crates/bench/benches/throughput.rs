use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqfdr_core::distributions::GGKernel;
use seqfdr_core::engines::{bh_reject, run_stream, Procedure};
use seqfdr_core::schedules::LambdaSchedule;
use seqfdr_core::simulation::{make_mixture, MixtureConfig};

fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn online_rules(c: &mut Criterion) {
    let schedule = LambdaSchedule::power(1.05, 0.1).unwrap();
    let p = uniform(100_000, 1);
    let mut group = c.benchmark_group("online");
    group.throughput(Throughput::Elements(p.len() as u64));
    for proc in [Procedure::Lord, Procedure::Lond] {
        group.bench_with_input(BenchmarkId::from_parameter(proc), &p, |b, p| {
            b.iter(|| run_stream(proc, &schedule, black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn benjamini_hochberg(c: &mut Criterion) {
    let mut group = c.benchmark_group("bh");
    for n in [1_000, 100_000] {
        let p = uniform(n, 2);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| bh_reject(black_box(p), 0.1).unwrap()));
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    for gamma in [1.0, 2.0, 2.5] {
        let k = GGKernel::natural(gamma).unwrap();
        group.bench_with_input(BenchmarkId::new("survival", gamma), &k, |b, k| {
            b.iter(|| k.survival(black_box(3.7)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("quantile", gamma), &k, |b, k| {
            b.iter(|| k.quantile(black_box(1e-4)).unwrap())
        });
    }
    group.finish();
}

fn mixture(c: &mut Criterion) {
    let cfg = MixtureConfig::normal(100_000, 0.6, 0.9, 0.1);
    let mut group = c.benchmark_group("mixture");
    group.throughput(Throughput::Elements(cfg.n as u64));
    group.bench_function("make_mixture", |b| {
        b.iter_batched(|| 0u64, |rep| make_mixture(&cfg, rep).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, online_rules, benjamini_hochberg, kernels, mixture);
criterion_main!(benches);
