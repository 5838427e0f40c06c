use blockgraph::algorithms::{self, PprParams, PprSource};
use blockgraph::cache_lab::{self, Policy, TraceAlgorithm};
use blockgraph::{Engine, ExecutionMode, PartitionPlan, RunConfig};
use blockgraph_bench::{image_of, skewed_graph};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn config(mode: ExecutionMode, buffer_pages: u64) -> RunConfig {
    RunConfig { threads: 4, mode, buffer_bytes: buffer_pages * 4096, ..RunConfig::default() }
}

fn algorithms_by_buffer(c: &mut Criterion) {
    let g = skewed_graph(50_000, 300_000, 2, true);
    let (_dir, img) = image_of(&g, &PartitionPlan::default());
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    for pages in [8u64, 64, 1 << 16] {
        for mode in [ExecutionMode::Async, ExecutionMode::Sync] {
            let id = format!("{mode:?}/{pages}p");
            let cfg = config(mode, pages);
            group.bench_with_input(BenchmarkId::new("bfs", &id), &cfg, |b, cfg| {
                b.iter(|| algorithms::bfs(&Engine::new(&img, cfg.clone()).unwrap(), 0).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("wcc", &id), &cfg, |b, cfg| {
                b.iter(|| algorithms::wcc(&Engine::new(&img, cfg.clone()).unwrap()).unwrap())
            });
        }
        let cfg = config(ExecutionMode::Async, pages);
        group.bench_with_input(BenchmarkId::new("ppr", format!("{pages}p")), &cfg, |b, cfg| {
            b.iter(|| {
                let e = Engine::new(&img, cfg.clone()).unwrap();
                algorithms::ppr(&e, PprSource::Vertex(0), PprParams { alpha: 0.15, r_max: 1e-7 }).unwrap()
            })
        });
    }
    group.finish();
}

fn cache_policies(c: &mut Criterion) {
    let g = skewed_graph(50_000, 300_000, 3, true);
    let (_dir, img) = image_of(&g, &PartitionPlan::default());
    let trace = cache_lab::record_trace(&img, TraceAlgorithm::Wcc, &config(ExecutionMode::Sync, 1 << 16)).unwrap();
    let cap = (trace.distinct_blocks() / 8).max(1);
    let mut group = c.benchmark_group("cache_lab");
    for p in Policy::ALL {
        group.bench_function(p.to_string(), |b| b.iter(|| cache_lab::simulate(&trace, p, cap, 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, algorithms_by_buffer, cache_policies);
criterion_main!(benches);
