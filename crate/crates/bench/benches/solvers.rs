use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qgdiff_bench::{parabolic_case, problem};
use qgdiff_core::diagnostics::poincare_estimate;
use qgdiff_core::{
    solve, solve_edge_bvp, solve_parabolic, Edge, EdgeBvp, GraphSpec, Method, MetricGraph, Nonlinearity, PBar,
    SolverConfig,
};

fn edge(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("edge");
    for p in [1.5, 2.0, 4.0] {
        let bvp = EdgeBvp::from_fn(1.0, p, Nonlinearity::Power { m: 2.0 }, 256, |x| (PI * x).cos());
        group.bench_with_input(BenchmarkId::new("p", p), &bvp, |b, bvp| {
            b.iter(|| solve_edge_bvp(black_box(bvp), &cfg).unwrap())
        });
    }
    group.finish();
}

fn elliptic(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("elliptic");
    for name in ["star-3", "triangle", "tree-5"] {
        let prob = problem(name);
        for method in [Method::Monolithic, Method::Gluing] {
            group.bench_with_input(BenchmarkId::new(method.to_string(), name), &prob, |b, prob| {
                b.iter(|| solve(black_box(prob), &cfg, method).unwrap())
            });
        }
    }
    group.finish();
}

fn parabolic(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let prob = problem("tree-5");
    let (v0, sched, grid) = parabolic_case(&prob.graph);
    c.bench_function("parabolic/tree-5/10-steps", |b| {
        b.iter(|| solve_parabolic(&prob.graph, black_box(&v0), &sched, &grid, &cfg).unwrap())
    });
}

fn poincare(c: &mut Criterion) {
    let g = MetricGraph::build(GraphSpec::new(
        &["a", "b"],
        vec![Edge::new("e", "a", "b", 1.0, 2.0).with_cells(128)],
    ))
    .unwrap();
    let pbar = PBar::of(&g);
    c.bench_function("poincare/eigen/128", |b| b.iter(|| poincare_estimate(black_box(&g), &pbar, 0, 0)));
}

criterion_group!(benches, edge, elliptic, parabolic, poincare);
criterion_main!(benches);
