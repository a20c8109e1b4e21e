use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fanfire_bench::fork_join_inputs;
use fanfire_core::charts::{run_smoothness, SyntheticOracle, SyntheticSpec};
use fanfire_core::cost::CostMode;
use fanfire_core::petri::fork_join::{fork_join_net, fork_join_registry};
use fanfire_core::runtime::{run, run_deterministic, RunConfig};
use fanfire_core::traversal::{run_traversal, GraphOracle};

fn fork_join(c: &mut Criterion) {
    let net = fork_join_net();
    let reg = fork_join_registry();
    let initial = fork_join_inputs(200);
    let mut g = c.benchmark_group("fork_join_200");
    g.bench_function("inline", |b| {
        b.iter(|| run_deterministic(&net, &reg, &initial, &RunConfig::with_workers(1)).unwrap())
    });
    for w in [1, 2, 4] {
        g.bench_with_input(BenchmarkId::new("pool", w), &w, |b, &w| {
            b.iter(|| run(&net, &reg, &initial, &RunConfig::with_workers(w)).unwrap())
        });
    }
    g.finish();
}

fn traversal(c: &mut Criterion) {
    let oracle = Arc::new(GraphOracle::random(500, 1000, 1));
    let mut g = c.benchmark_group("graph_traversal_500");
    g.sample_size(20);
    for trace in [false, true] {
        g.bench_with_input(BenchmarkId::new("trace", trace), &trace, |b, &trace| {
            b.iter(|| run_traversal(Arc::clone(&oracle), &RunConfig::with_workers(2).trace(trace)).unwrap())
        });
    }
    g.finish();
}

fn smoothness(c: &mut Criterion) {
    let oracle = Arc::new(
        SyntheticOracle::new(SyntheticSpec {
            seed: 1,
            branching: 4,
            depth: 4,
            cost_ms: 0.0,
            singular_leaves: vec![],
            cost_mode: CostMode::Busy,
        })
        .unwrap(),
    );
    let root = oracle.root();
    let mut g = c.benchmark_group("chart_tree_b4_d4");
    g.sample_size(20);
    g.bench_function("smooth", |b| {
        b.iter(|| run_smoothness(Arc::clone(&oracle), std::slice::from_ref(&root), &RunConfig::with_workers(2)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, fork_join, traversal, smoothness);
criterion_main!(benches);
