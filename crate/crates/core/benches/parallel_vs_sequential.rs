//! Each kernel runs inside a 1-thread rayon pool and inside a pool with all
//! available threads. Built with `--no-default-features`, both variants take
//! the sequential code path, which gives the baseline for the fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lrmf::metrics::{sensitivity_multi, ParticipationSchema, SensitivityMode};
use lrmf::noise_engine::empirical_mean_se;
use lrmf::{build_workload, factorize, make_schedule, BisrBase, ScheduleKind, Strategy};
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pools() -> Vec<(String, ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut v = vec![(
        "threads-1".to_string(),
        ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
    )];
    if all > 1 {
        v.push((
            format!("threads-{all}"),
            ThreadPoolBuilder::new().num_threads(all).build().unwrap(),
        ));
    }
    v
}

fn dense_kernels(c: &mut Criterion) {
    let s = make_schedule(ScheduleKind::Cosine, 512, 0.05, None).unwrap();
    let w = build_workload(&s);
    let a = w.a_chi().clone();
    let root = a.sqrt().unwrap();
    let mut g = c.benchmark_group(format!("dense_n512_parallel-{}", lrmf::is_parallel()));
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("multiply", &name), |b| {
            b.iter(|| pool.install(|| black_box(a.multiply(&root).unwrap())))
        });
        g.bench_function(BenchmarkId::new("sqrt", &name), |b| {
            b.iter(|| pool.install(|| black_box(a.sqrt().unwrap())))
        });
        g.bench_function(BenchmarkId::new("inverse", &name), |b| {
            b.iter(|| pool.install(|| black_box(root.inverse().unwrap())))
        });
        g.bench_function(BenchmarkId::new("bisr_lr_factorize", &name), |b| {
            let strategy = Strategy::Bisr {
                bandwidth: 16,
                base: BisrBase::LrWorkload,
            };
            b.iter(|| pool.install(|| black_box(factorize(&w, strategy).unwrap())))
        });
    }
    g.finish();
}

fn enumeration_and_sampling(c: &mut Criterion) {
    let s = make_schedule(ScheduleKind::Exponential, 20, 0.1, None).unwrap();
    let f20 = factorize(&build_workload(&s), Strategy::LrAware).unwrap();
    let s = make_schedule(ScheduleKind::Exponential, 64, 0.1, None).unwrap();
    let f64_ = factorize(&build_workload(&s), Strategy::PrefixSqrt).unwrap();
    let schema = ParticipationSchema::MinSep { b: 2, k: 10 };
    let mut g = c.benchmark_group(format!("stochastic_parallel-{}", lrmf::is_parallel()));
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("exact_sensitivity_n20", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    black_box(sensitivity_multi(f20.c(), schema, SensitivityMode::Exact).unwrap())
                })
            })
        });
        g.bench_function(BenchmarkId::new("monte_carlo_2000", &name), |b| {
            b.iter(|| {
                pool.install(|| black_box(empirical_mean_se(&f64_, 1.0, 1.0, 2000, 7).unwrap()))
            })
        });
    }
    g.finish();
}

criterion_group!(benches, dense_kernels, enumeration_and_sampling);
criterion_main!(benches);
