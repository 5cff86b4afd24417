use std::hint::black_box;

use costa_bench::fixture;
use costa_core::synth::generate_instances;
use costa_core::toolgraph::{build_tdg, build_tool_subgraph};
use costa_core::{astar_search, precompute_heuristics, Alpha, SearchConfig, SimExecutor};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn graph_construction(c: &mut Criterion) {
    let f = fixture("example1");
    c.bench_function("tdg/full_mdt", |b| b.iter(|| build_tdg(black_box(&f.mdt))));
    let tdg = build_tdg(&f.mdt);
    c.bench_function("subgraph/example1", |b| {
        b.iter(|| build_tool_subgraph(black_box(&f.tree), &f.mdt, &tdg).unwrap())
    });
}

fn heuristics(c: &mut Criterion) {
    let f = fixture("example1");
    let mut group = c.benchmark_group("heuristics");
    for a in [0.0, 1.0, 2.0] {
        let alpha = Alpha::new(a).unwrap();
        group.bench_with_input(BenchmarkId::new("example1", a), &alpha, |b, &alpha| {
            b.iter(|| precompute_heuristics(&f.graph, &f.benchmark, alpha).unwrap())
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let f = fixture("example1");
    let exec = SimExecutor::deterministic(&f.benchmark);
    let mut group = c.benchmark_group("astar");
    for a in [0.0, 1.0, 2.0] {
        let cfg = SearchConfig::new(Alpha::new(a).unwrap());
        let h = precompute_heuristics(&f.graph, &f.benchmark, cfg.alpha).unwrap();
        group.bench_with_input(BenchmarkId::new("example1", a), &cfg, |b, cfg| {
            b.iter(|| astar_search(&f.graph, &h, &exec, cfg).unwrap())
        });
    }

    // Larger random DAGs; sizes grow with max_nodes.
    for max_nodes in [10, 20] {
        let instances = generate_instances(7, 16, max_nodes);
        let cfg = SearchConfig::new(Alpha::new(1.0).unwrap());
        let prepared: Vec<_> = instances
            .iter()
            .map(|i| (i, precompute_heuristics(&i.graph, &i.benchmark, cfg.alpha).unwrap()))
            .collect();
        group.bench_function(BenchmarkId::new("synth16", max_nodes), |b| {
            b.iter(|| {
                for (inst, h) in &prepared {
                    let exec = SimExecutor::deterministic(&inst.benchmark);
                    black_box(astar_search(&inst.graph, h, &exec, &cfg).unwrap());
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, graph_construction, heuristics, search);
criterion_main!(benches);
