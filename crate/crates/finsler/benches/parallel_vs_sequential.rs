//! Parallel sweeps against the same work pinned to one rayon thread.
//!
//! The sequential rows run the identical code inside a single-thread pool,
//! so the spread between rows is pure scheduling overhead versus speedup.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use finsler::optimize::OptimizeOptions;
use finsler::scenes;
use finsler::ContinuationOptions;

fn single_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool construction")
}

fn audit_sampling(c: &mut Criterion) {
    let metric = scenes::randers_constant(&[0.5, 0.0]).expect("subunit drift");
    let pool = single_thread_pool();
    let mut group = c.benchmark_group("metric_audit");
    for &samples in &[1_000usize, 10_000] {
        group.bench_with_input(BenchmarkId::new("parallel", samples), &samples, |b, &n| {
            b.iter(|| metric.audit(n, 7));
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", samples),
            &samples,
            |b, &n| {
                b.iter(|| pool.install(|| metric.audit(n, 7)));
            },
        );
    }
    group.finish();
}

fn direction_fans(c: &mut Criterion) {
    let (metric, domain) = scenes::annulus();
    let x = metric.chart().point_from(&[1.0, 0.0]).expect("rim point");
    let pool = single_thread_pool();
    let mut group = c.benchmark_group("convexity_fan");
    for &count in &[64usize, 256] {
        group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, &n| {
            b.iter(|| {
                finsler::infinitesimal_convexity_check(&metric, &domain, &x, n, 11)
                    .expect("fan check")
            });
        });
        group.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, &n| {
            b.iter(|| {
                pool.install(|| {
                    finsler::infinitesimal_convexity_check(&metric, &domain, &x, n, 11)
                        .expect("fan check")
                })
            });
        });
    }
    group.finish();
}

fn winding_sweeps(c: &mut Criterion) {
    let metric = scenes::flat_cylinder();
    let domain = finsler::Domain::full(metric.chart().clone());
    let p = metric.chart().point_from(&[0.0, 0.0]).expect("p");
    let q = metric.chart().point_from(&[3.0, 1.0]).expect("q");
    let options = ContinuationOptions {
        epsilon_start: 1.0e-3,
        stages: 2,
        initial_segments: 8,
        max_segments: 8,
        optimize: OptimizeOptions {
            gradient_tolerance: 1.0e-6,
            max_iterations: 500,
            ..OptimizeOptions::default()
        },
        ..ContinuationOptions::default()
    };
    let pool = single_thread_pool();
    let mut group = c.benchmark_group("winding_sweep");
    group.sample_size(10);
    for &winding in &[2u32, 4] {
        group.bench_with_input(BenchmarkId::new("parallel", winding), &winding, |b, &w| {
            b.iter(|| {
                finsler::multiplicity_search(&metric, &domain, &p, &q, w, &options).expect("sweep")
            });
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", winding),
            &winding,
            |b, &w| {
                b.iter(|| {
                    pool.install(|| {
                        finsler::multiplicity_search(&metric, &domain, &p, &q, w, &options)
                            .expect("sweep")
                    })
                });
            },
        );
    }
    group.finish();
}

criterion_group!(benches, audit_sampling, direction_fans, winding_sweeps);
criterion_main!(benches);
