//! Sequential vs parallel timing of the two heaviest loops: the LNP
//! sensitivity sweep and geodesic distances. "sequential" runs inside a
//! one-thread rayon pool, which is what the crate does without the
//! `parallel` feature; "parallel" uses the default pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relop::lnp::{sensitivity_sweep, SweepConfig};
use relop::manifold::{geodesic_distances, Metric};
use relop::synth::{gen_manifold, ManifoldKind};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn sweep(c: &mut Criterion) {
    let s = gen_manifold(ManifoldKind::TwoMoons, 100, 0.08, 1).unwrap();
    let cfg = SweepConfig {
        label_counts: vec![8],
        k_range: (4..=12).collect(),
        runs: 8,
        metrics: vec![Metric::Euclidean, Metric::Geodesic],
        ..Default::default()
    };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, pool.current_num_threads()), |b| {
            b.iter(|| pool.install(|| sensitivity_sweep(&s.points, &s.classes, 2, &cfg).unwrap()))
        });
    }
    g.finish();
}

fn geodesic(c: &mut Criterion) {
    let s = gen_manifold(ManifoldKind::SwissRoll, 400, 0.0, 1).unwrap();
    let mut g = c.benchmark_group("geodesic");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, pool.current_num_threads()), |b| {
            b.iter(|| pool.install(|| geodesic_distances(&s.points).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, sweep, geodesic);
criterion_main!(benches);
