//! Fixtures shared by the solver benchmarks.

use qgdiff_core::diagnostics::battery;
use qgdiff_core::{EdgeFunction, EllipticProblem, MetricGraph, Schedule, TimeGrid};

/// Battery problem by name (`single-edge`, `path-2`, `star-3`, `triangle`,
/// `tree-5`).
pub fn problem(name: &str) -> EllipticProblem {
    battery()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| p)
        .unwrap_or_else(|| panic!("no battery problem {name}"))
}

/// Ten implicit Euler steps from a smooth datum on the given graph.
pub fn parabolic_case(graph: &MetricGraph) -> (EdgeFunction, Schedule, TimeGrid) {
    let v0 = EdgeFunction::from_fn(graph, |e, x| (2.0 * x + e as f64).sin());
    (v0, Schedule::zero(graph), TimeGrid::uniform(0.1, 0.01).expect("fixed grid"))
}
