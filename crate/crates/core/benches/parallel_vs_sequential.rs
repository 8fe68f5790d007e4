//! The same workloads on the global rayon pool and on a one-thread pool.
//! Built with `--no-default-features` both rows run the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tflab::decomposition::synth::{corpus_family, corpus_params, probes, run_corpus_entry};
use tflab::operators::{operator_profile, Kernel};
use tflab::signal::{Grid, SampledFunction};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![
        ("parallel", rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()),
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn truncated_sums(c: &mut Criterion) {
    let fam = corpus_family(3, 1).unwrap();
    let ps = probes(&fam, 2, 1, 1).unwrap();
    let all = fam.system.all();
    let mut g = c.benchmark_group("tmax");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, tflab::par::is_parallel()), |b| {
            b.iter(|| pool.install(|| fam.tmax(&all, &ps[0])))
        });
    }
    g.finish();
}

fn operators(c: &mut Criterion) {
    let grid = Grid::window(-8.0, 8.0, 8).unwrap();
    let f = SampledFunction::from_real(grid, |x| (-x * x).exp());
    let h = SampledFunction::from_real(grid, |x| (-x * x / 2.0).exp() * x.cos());
    let k = Kernel::reciprocal();
    let mut g = c.benchmark_group("operator_profile");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, tflab::par::is_parallel()), |b| {
            b.iter(|| pool.install(|| operator_profile(&f, &h, &k, -1.0).unwrap()))
        });
    }
    g.finish();
}

fn master_split(c: &mut Criterion) {
    let params = corpus_params();
    let mut g = c.benchmark_group("split_main");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new(name, tflab::par::is_parallel()), |b| {
            b.iter(|| pool.install(|| run_corpus_entry(1, 1, &params).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, truncated_sums, operators, master_split);
criterion_main!(benches);
