//! Executable property checks: comparison, L¹ contraction, L∞ and ≪
//! bounds, integral-solution inequality, monotone flux dependence, Poincaré
//! constant, and a dense linear reference for the heat equation.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph_elliptic::{solve, solve_monolithic, EllipticProblem, EllipticSolution, Method};
use crate::grid_functions::{
    bracket_l1, integrate, l1_norm, ll_worst_gap, lp_norms, gradient_lp_norms, node_weight, positive_part_integral,
    refined_k_grid, EdgeFunction, GraphFunction, PBar,
};
use crate::metric_graph::{Edge, GraphSpec, MetricGraph};
use crate::newton::{SolveError, SolverConfig};
use crate::nonlinearity::Nonlinearity;
use crate::parabolic::{
    energy_ledger, richardson_order, solve_parabolic, Forcing, ParabolicError, Schedule, TemporalOrder, TimeGrid,
    Trajectory, VertexFlux,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Parabolic(#[from] ParabolicError),
    #[error("heat oracle needs p = 2 and identity γ on every edge")]
    NotLinearCase,
    #[error("unknown suite {0}")]
    UnknownSuite(String),
    #[error("{0}")]
    Precondition(String),
}

/// Outcome of one property check. `passed` holds iff the worst signed
/// violation is at most the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub samples: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, seed: u64, tolerance: f64, violations: impl IntoIterator<Item = f64>) -> Self {
        let mut samples = 0;
        let mut worst = f64::NEG_INFINITY;
        let mut nan = false;
        for v in violations {
            samples += 1;
            nan |= v.is_nan();
            worst = worst.max(v);
        }
        let worst = if nan { f64::NAN } else { worst };
        Self {
            name: name.into(),
            samples,
            worst_violation: worst,
            tolerance,
            passed: !nan && (samples == 0 || worst <= tolerance),
            seed,
        }
    }

    /// Combines reports of the same property into one.
    pub fn merge(name: impl Into<String>, seed: u64, reports: &[PropertyReport]) -> Self {
        let tolerance = reports.first().map_or(0.0, |r| r.tolerance);
        let mut out = Self::new(
            name,
            seed,
            tolerance,
            reports.iter().map(|r| r.worst_violation - r.tolerance + tolerance),
        );
        out.samples = reports.iter().map(|r| r.samples).sum();
        out.passed = reports.iter().all(|r| r.passed);
        out
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:e} (tol {:e}, {} samples, seed {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst_violation,
            self.tolerance,
            self.samples,
            self.seed
        )
    }
}

fn diff(a: &EdgeFunction, b: &EdgeFunction) -> EdgeFunction {
    a.zip_with(b, |x, y| x - y)
}

fn pos_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.max(0.0)).sum()
}

/// Comparison principle for two elliptic problems on the same graph:
/// `α∫(v₁−v₂)⁺ ≤ ∫(g₁−g₂)⁺ + Σ(ω₁−ω₂)⁺`, and `v₁ ≥ v₂` nodewise when the
/// data are ordered.
pub fn comparison_test(
    p1: &EllipticProblem,
    p2: &EllipticProblem,
    cfg: &SolverConfig,
    method: Method,
    seed: u64,
) -> Result<PropertyReport, DiagnosticError> {
    let s1 = solve(p1, cfg, method)?;
    let s2 = solve(p2, cfg, method)?;
    Ok(comparison_report(p1, p2, &s1, &s2, seed))
}

pub fn comparison_report(
    p1: &EllipticProblem,
    p2: &EllipticProblem,
    s1: &EllipticSolution,
    s2: &EllipticSolution,
    seed: u64,
) -> PropertyReport {
    let graph = &p1.graph;
    let dg = diff(&p1.g, &p2.g);
    let dw: Vec<f64> = p1.omega.iter().zip(&p2.omega).map(|(a, b)| a - b).collect();
    let lhs = p1.alpha * positive_part_integral(graph, &diff(&s1.v, &s2.v)).unwrap_or(f64::NAN);
    let rhs = positive_part_integral(graph, &dg).unwrap_or(f64::NAN) + pos_sum(&dw);
    let mut violations = vec![lhs - rhs];
    let ordered = dg.values().iter().flatten().all(|&x| x >= 0.0) && dw.iter().all(|&x| x >= 0.0);
    if ordered {
        let worst_order = s2.v.zip_with(&s1.v, |b, a| b - a).values().iter().flatten().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        violations.push(worst_order);
    }
    PropertyReport::new("comparison", seed, 1e-8, violations)
}

/// Cumulative L¹ contraction between two trajectories on the same grid:
/// `∫(v₁(t_n)−v₂(t_n))⁺ ≤ ∫(v₁,₀−v₂,₀)⁺ + Σ_{i≤n} τ_i(∫(f₁,ᵢ−f₂,ᵢ)⁺ + Σ(ω₁,ᵢ−ω₂,ᵢ)⁺)`.
pub fn contraction_test(
    graph: &MetricGraph,
    first: (&Trajectory, &Schedule),
    second: (&Trajectory, &Schedule),
    seed: u64,
) -> Result<PropertyReport, DiagnosticError> {
    let (t1, s1) = first;
    let (t2, s2) = second;
    if t1.records.len() != t2.records.len() {
        return Err(DiagnosticError::Precondition("trajectories differ in length".into()));
    }
    let mut budget = positive_part_integral(graph, &diff(&t1.records[0].v, &t2.records[0].v)).unwrap_or(f64::NAN);
    let mut violations = Vec::new();
    for (a, b) in t1.records.iter().zip(&t2.records).skip(1) {
        let f1 = s1.forcing_at(graph, a.t).map_err(ParabolicError::from)?;
        let f2 = s2.forcing_at(graph, b.t).map_err(ParabolicError::from)?;
        let w1 = s1.omega_at(a.t).map_err(ParabolicError::from)?;
        let w2 = s2.omega_at(b.t).map_err(ParabolicError::from)?;
        let dw: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| x - y).collect();
        budget += a.tau * (positive_part_integral(graph, &diff(&f1, &f2)).unwrap_or(f64::NAN) + pos_sum(&dw));
        let lhs = positive_part_integral(graph, &diff(&a.v, &b.v)).unwrap_or(f64::NAN);
        violations.push(lhs - budget);
    }
    Ok(PropertyReport::new("contraction", seed, 1e-7, violations))
}

/// `∥v∥_∞ ≤ ∥g∥_∞` and `v ≪ g` for a problem with `ω ≡ 0`, `α = 1`.
pub fn linf_and_ll_test(
    prob: &EllipticProblem,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<PropertyReport, DiagnosticError> {
    if prob.omega.iter().any(|&w| w != 0.0) || prob.alpha != 1.0 {
        return Err(DiagnosticError::Precondition("needs ω ≡ 0 and α = 1".into()));
    }
    let sol = solve_monolithic(prob, cfg)?;
    Ok(linf_report(prob, &sol, seed))
}

pub fn linf_report(prob: &EllipticProblem, sol: &EllipticSolution, seed: u64) -> PropertyReport {
    let graph = &prob.graph;
    let sup = sol.v.sup_norm() - prob.g.sup_norm();
    let ks = refined_k_grid(&[&sol.v, &prob.g]);
    let ll = if ks.is_empty() {
        0.0
    } else {
        ll_worst_gap(graph, &sol.v, &prob.g, &ks).unwrap_or(f64::NAN)
    };
    PropertyReport::new("linf-and-ll", seed, 1e-8, [sup, ll])
}

/// Element `(z̃, (ṽ, ω̃))` of the graph of the operator: `z̃ = γ̄(ũ)` where
/// `ũ` solves `γ̄(ũ) − Δ_{p̄}ũ = g̃` with flux `ω̃`, and `ṽ = g̃ − z̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSample {
    pub z: EdgeFunction,
    pub v: EdgeFunction,
    pub omega: Vec<f64>,
}

pub fn operator_sample(
    graph: &MetricGraph,
    g: EdgeFunction,
    omega: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<OperatorSample, DiagnosticError> {
    let prob = EllipticProblem::new(graph.clone(), g, omega)?;
    let sol = solve_monolithic(&prob, cfg)?;
    Ok(OperatorSample {
        v: diff(&prob.g, &sol.v),
        z: sol.v,
        omega: prob.omega,
    })
}

/// Per step:
/// `∥v_i−z̃∥₁ − ∥v_{i−1}−z̃∥₁ ≤ τ_i ([v_i−z̃, f_i−ṽ] + Σ_v |ω_i−ω̃|)`.
pub fn integral_solution_check(
    graph: &MetricGraph,
    traj: &Trajectory,
    schedule: &Schedule,
    samples: &[OperatorSample],
    seed: u64,
) -> Result<PropertyReport, DiagnosticError> {
    let mut violations = Vec::new();
    for w in traj.records.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let f = schedule.forcing_at(graph, cur.t).map_err(ParabolicError::from)?;
        let omega = schedule.omega_at(cur.t).map_err(ParabolicError::from)?;
        for s in samples {
            let x = diff(&cur.v, &s.z);
            let lhs = l1_norm(graph, &x).unwrap_or(f64::NAN) - l1_norm(graph, &diff(&prev.v, &s.z)).unwrap_or(f64::NAN);
            let y = diff(&f, &s.v);
            let vertex: f64 = omega.iter().zip(&s.omega).map(|(a, b)| (a - b).abs()).sum();
            let rhs = cur.tau * (bracket_l1(graph, &x, &y).unwrap_or(f64::NAN) + vertex);
            violations.push(lhs - rhs);
        }
    }
    Ok(PropertyReport::new("integral-solution", seed, 1e-7, violations))
}

/// Which fluxes a sweep perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// `ω + ε e_v`; `u(v)` must be nondecreasing.
    Single(usize),
    /// `ω + ε (e_plus − e_minus)`; `u(plus)` nondecreasing and `u(minus)`
    /// nonincreasing.
    Pair { plus: usize, minus: usize },
}

fn sweep_solve(prob: &EllipticProblem, sweep: Sweep, eps: f64, cfg: &SolverConfig) -> Result<(f64, f64), DiagnosticError> {
    let mut p = prob.clone();
    match sweep {
        Sweep::Single(v) => p.omega[v] += eps,
        Sweep::Pair { plus, minus } => {
            p.omega[plus] += eps;
            p.omega[minus] -= eps;
        }
    }
    let sol = solve_monolithic(&p, cfg)?;
    Ok(match sweep {
        Sweep::Single(v) => (sol.u.vertex_value(v), 0.0),
        Sweep::Pair { plus, minus } => (sol.u.vertex_value(plus), sol.u.vertex_value(minus)),
    })
}

/// Monotone dependence of vertex values on vertex fluxes over an ascending
/// `eps_grid`. Consecutive values may not decrease by more than 1e-10;
/// points at least 0.5 apart must differ by more than 1e-12; and the change
/// over `δ = 0.1, 0.05, 0.025` at the grid midpoint must shrink.
pub fn monotone_flux_sweep(
    prob: &EllipticProblem,
    sweep: Sweep,
    eps_grid: &[f64],
    cfg: &SolverConfig,
    seed: u64,
) -> Result<PropertyReport, DiagnosticError> {
    if eps_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiagnosticError::Precondition("ε grid must ascend".into()));
    }
    let vals: Vec<(f64, f64)> = eps_grid
        .iter()
        .map(|&e| sweep_solve(prob, sweep, e, cfg))
        .collect::<Result<_, _>>()?;
    // Violations are measured against a tolerance of 1e-10; the strictness
    // margin 1e-12 is folded in by shifting.
    let tol = 1e-10;
    let mut violations = Vec::new();
    let pair = matches!(sweep, Sweep::Pair { .. });
    for i in 1..vals.len() {
        violations.push(vals[i - 1].0 - vals[i].0);
        if pair {
            violations.push(vals[i].1 - vals[i - 1].1);
        }
    }
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            if eps_grid[j] - eps_grid[i] >= 0.5 {
                violations.push(tol - (vals[j].0 - vals[i].0 - 1e-12));
                if pair {
                    violations.push(tol - (vals[i].1 - vals[j].1 - 1e-12));
                }
                break;
            }
        }
    }
    let mid = eps_grid[eps_grid.len() / 2];
    let base = sweep_solve(prob, sweep, mid, cfg)?.0;
    let steps: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|d| sweep_solve(prob, sweep, mid + d, cfg).map(|v| (v.0 - base).abs()))
        .collect::<Result<_, _>>()?;
    violations.push(steps[1] - steps[0] - tol);
    violations.push(steps[2] - steps[1] - tol);
    let name = match sweep {
        Sweep::Single(_) => "flux-sweep-single-vertex",
        Sweep::Pair { .. } => "flux-sweep-compensated-pair",
    };
    Ok(PropertyReport::new(name, seed, tol, violations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoincareMethod {
    Eigen,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareEstimate {
    /// For `Eigen` the discrete constant; for `Sampled` the smallest ratio
    /// `∥u'∥/∥u∥` seen, an upper bound for the true constant.
    pub lambda: f64,
    pub method: PoincareMethod,
    pub samples: usize,
}

/// Global dof of every node, edge by edge.
fn dof_map(graph: &MetricGraph) -> (usize, Vec<Vec<usize>>) {
    let mut next = graph.vertex_count();
    let map = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let (from, to) = graph.endpoints(k);
            let nodes = (0..=e.cells)
                .map(|j| match j {
                    0 => from,
                    j if j == e.cells => to,
                    j => next + j - 1,
                })
                .collect();
            next += e.cells - 1;
            nodes
        })
        .collect();
    (next, map)
}

/// Lumped mass diagonal and stiffness matrix for `p = 2` over all dofs.
fn mass_and_stiffness(graph: &MetricGraph) -> (DVector<f64>, DMatrix<f64>) {
    let (n, map) = dof_map(graph);
    let mut mass = DVector::zeros(n);
    let mut stiff = DMatrix::zeros(n, n);
    for (e, dofs) in graph.edges().iter().zip(&map) {
        let h = e.h();
        for (j, &d) in dofs.iter().enumerate() {
            mass[d] += node_weight(h, e.cells, j);
        }
        for c in 1..=e.cells {
            let (a, b) = (dofs[c - 1], dofs[c]);
            stiff[(a, a)] += 1.0 / h;
            stiff[(b, b)] += 1.0 / h;
            stiff[(a, b)] -= 1.0 / h;
            stiff[(b, a)] -= 1.0 / h;
        }
    }
    (mass, stiff)
}

/// Eigenpairs of `M^{-1/2} K M^{-1/2}`, ascending, with eigenvectors mapped
/// back to nodal values.
fn pencil_eigen(graph: &MetricGraph) -> (Vec<f64>, Vec<DVector<f64>>) {
    let (mass, stiff) = mass_and_stiffness(graph);
    let n = mass.len();
    let s = mass.map(|m| 1.0 / m.sqrt());
    let a = DMatrix::from_fn(n, n, |i, j| s[i] * stiff[(i, j)] * s[j]);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).component_mul(&s))
        .collect();
    (values, vectors)
}

/// Poincaré constant `λ` with `λ∥u∥ ≤ ∥u'∥` for zero-mean `u`. Uses the
/// second eigenvalue of the (stiffness, lumped mass) pencil when every
/// exponent is 2; otherwise the minimum ratio over `samples` random smooth
/// zero-mean functions built from low pencil modes.
pub fn poincare_estimate(graph: &MetricGraph, pbar: &PBar, samples: usize, seed: u64) -> PoincareEstimate {
    let (values, vectors) = pencil_eigen(graph);
    if pbar.0.iter().all(|&p| p == 2.0) {
        return PoincareEstimate {
            lambda: values.get(1).copied().unwrap_or(0.0).max(0.0).sqrt(),
            method: PoincareMethod::Eigen,
            samples: 0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = vectors.len().min(9);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut x = DVector::zeros(vectors[0].len());
        for m in 1..modes {
            let c: f64 = rng.random_range(-1.0..1.0) / m as f64;
            x += &vectors[m] * c;
        }
        let u = GraphFunction::from_dofs(graph, x.as_slice());
        let mean = integrate(graph, &u).unwrap_or(0.0) / graph.total_length();
        let u = GraphFunction::from_dofs(graph, &u.to_dofs().iter().map(|v| v - mean).collect::<Vec<_>>());
        let num = gradient_lp_norms(graph, &u, pbar).map(|n| n.total).unwrap_or(f64::NAN);
        let den = lp_norms(graph, &u, pbar).map(|n| n.total).unwrap_or(f64::NAN);
        if den > 0.0 {
            best = best.min(num / den);
        }
    }
    PoincareEstimate {
        lambda: best,
        method: PoincareMethod::Sampled,
        samples,
    }
}

/// States of the dense backward-Euler reference.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTrajectory {
    pub times: Vec<f64>,
    pub v: Vec<EdgeFunction>,
}

/// Backward Euler `(M/τ + K)u_i = M v_{i−1}/τ + M f_i + ω_i` on the
/// assembled global system, factorised densely. The right side is lumped
/// edge by edge, so data that jump across a vertex are integrated per edge.
pub fn heat_oracle(
    graph: &MetricGraph,
    v0: &EdgeFunction,
    schedule: &Schedule,
    grid: &TimeGrid,
) -> Result<HeatTrajectory, DiagnosticError> {
    if graph.edges().iter().any(|e| e.p != 2.0 || !e.gamma.is_identity()) {
        return Err(DiagnosticError::NotLinearCase);
    }
    crate::grid_functions::check_shape(graph, v0).map_err(|e| DiagnosticError::Precondition(e.to_string()))?;
    let (mass, stiff) = mass_and_stiffness(graph);
    let (n, map) = dof_map(graph);
    let mut out = HeatTrajectory {
        times: vec![grid.times()[0]],
        v: vec![v0.clone()],
    };
    let mut factor: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
    for i in 1..=grid.steps() {
        let tau = grid.step(i);
        let t = grid.times()[i];
        if factor.as_ref().is_none_or(|(tf, _)| *tf != tau) {
            let a = DMatrix::from_fn(n, n, |r, c| stiff[(r, c)] + if r == c { mass[r] / tau } else { 0.0 });
            factor = Some((tau, a.lu()));
        }
        let f = schedule.forcing_at(graph, t).map_err(ParabolicError::from)?;
        let omega = schedule.omega_at(t).map_err(ParabolicError::from)?;
        let prev = out.v.last().expect("initial state present");
        let mut rhs = DVector::zeros(n);
        for (k, (e, dofs)) in graph.edges().iter().zip(&map).enumerate() {
            for (j, &d) in dofs.iter().enumerate() {
                rhs[d] += node_weight(e.h(), e.cells, j) * (prev.edge(k)[j] / tau + f.edge(k)[j]);
            }
        }
        for (r, w) in omega.iter().enumerate() {
            rhs[r] += w;
        }
        let u = factor
            .as_ref()
            .unwrap()
            .1
            .solve(&rhs)
            .ok_or_else(|| DiagnosticError::Precondition("singular heat system".into()))?;
        out.times.push(t);
        out.v.push(EdgeFunction::from_values(
            map.iter().map(|dofs| dofs.iter().map(|&d| u[d]).collect()).collect(),
        ));
    }
    Ok(out)
}

/// Options of the random graph generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomGraphOptions {
    pub max_edges: usize,
    pub cells: (usize, usize),
    pub exponents: Vec<f64>,
    pub gammas: Vec<Nonlinearity>,
    pub allow_cycles: bool,
}

impl Default for RandomGraphOptions {
    fn default() -> Self {
        Self {
            max_edges: 6,
            cells: (8, 32),
            exponents: vec![1.5, 2.0, 3.0, 4.0],
            gammas: vec![
                Nonlinearity::Identity,
                Nonlinearity::Power { m: 0.5 },
                Nonlinearity::Power { m: 2.0 },
            ],
            allow_cycles: true,
        }
    }
}

/// Random connected graph: a random tree plus, optionally, chords.
pub fn random_graph(rng: &mut impl Rng, opts: &RandomGraphOptions) -> MetricGraph {
    let max_edges = opts.max_edges.clamp(1, 6);
    let edges_target = rng.random_range(1..=max_edges);
    let chords = if opts.allow_cycles && edges_target >= 3 { rng.random_range(0..=1usize) } else { 0 };
    let tree_edges = edges_target - chords;
    let nv = tree_edges + 1;
    let names: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 1..nv {
        let parent = rng.random_range(0..i);
        pairs.push(if rng.random_bool(0.5) { (parent, i) } else { (i, parent) });
    }
    for _ in 0..chords {
        for _ in 0..20 {
            let a = rng.random_range(0..nv);
            let b = rng.random_range(0..nv);
            if a != b && !pairs.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
                pairs.push((a, b));
                break;
            }
        }
    }
    let edges = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let p = opts.exponents[rng.random_range(0..opts.exponents.len())];
            let gamma = opts.gammas[rng.random_range(0..opts.gammas.len())].clone();
            Edge::new(&format!("e{k}"), &names[a], &names[b], rng.random_range(0.5..1.5), p)
                .with_gamma(gamma)
                .with_cells(rng.random_range(opts.cells.0..=opts.cells.1.min(128)))
        })
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    MetricGraph::build(GraphSpec::new(&refs, edges)).expect("generator builds valid graphs")
}

/// Smooth random load `a + b sin(c x + d)` per edge.
pub fn random_load(rng: &mut impl Rng, graph: &MetricGraph) -> EdgeFunction {
    let coeffs: Vec<[f64; 4]> = (0..graph.edge_count())
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..6.3),
            ]
        })
        .collect();
    EdgeFunction::from_fn(graph, |e, x| {
        let [a, b, c, d] = coeffs[e];
        a + b * (c * x + d).sin()
    })
}

pub fn random_flux(rng: &mut impl Rng, graph: &MetricGraph) -> Vec<f64> {
    (0..graph.vertex_count()).map(|_| rng.random_range(-0.5..0.5)).collect()
}

/// Seed of trial `i` within a suite run with `seed`.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

fn trial_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, i))
}

/// Names accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "mass-balance",
    "comparison",
    "linf",
    "methods",
    "flux-sweep",
    "resolvent",
    "contraction",
    "energy",
    "integral",
    "poincare",
];

/// Mass balance `|α∫γ̄(u) − ∫g − Σω| ≤ 1e-8 (1 + |∫g| + Σ|ω|)` for one
/// random draw.
pub fn mass_balance_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    let mut rng = trial_rng(seed, i);
    let graph = random_graph(&mut rng, &RandomGraphOptions::default());
    let g = random_load(&mut rng, &graph);
    let omega = random_flux(&mut rng, &graph);
    let prob = EllipticProblem::new(graph.clone(), g.clone(), omega.clone())?;
    let sol = solve_monolithic(&prob, cfg)?;
    let lhs = integrate(&graph, &sol.v).unwrap_or(f64::NAN);
    let rhs = integrate(&graph, &g).unwrap_or(f64::NAN) + omega.iter().sum::<f64>();
    Ok(PropertyReport::new("mass-balance", trial_seed(seed, i), 1e-8, [(lhs - rhs).abs() / prob.scale()]))
}

/// Ordered pair of random problems on one random graph.
pub fn comparison_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    let mut rng = trial_rng(seed, i);
    let graph = random_graph(&mut rng, &RandomGraphOptions::default());
    let g2 = random_load(&mut rng, &graph);
    let bump = random_load(&mut rng, &graph).map(|x| x.abs());
    let g1 = g2.zip_with(&bump, |a, b| a + b);
    let w2 = random_flux(&mut rng, &graph);
    let w1: Vec<f64> = w2.iter().map(|w| w + rng.random_range(0.0..0.3)).collect();
    let p1 = EllipticProblem::new(graph.clone(), g1, w1)?;
    let p2 = EllipticProblem::new(graph, g2, w2)?;
    comparison_test(&p1, &p2, cfg, Method::Monolithic, trial_seed(seed, i))
}

pub fn linf_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    let mut rng = trial_rng(seed, i);
    let graph = random_graph(&mut rng, &RandomGraphOptions::default());
    let g = random_load(&mut rng, &graph);
    let prob = EllipticProblem::with_load(graph, g)?;
    let mut r = linf_and_ll_test(&prob, cfg, trial_seed(seed, i))?;
    r.seed = trial_seed(seed, i);
    Ok(r)
}

/// The fixed cross-validation battery: single edge, 2-path, 3-star,
/// triangle and a 5-edge tree, with mixed exponents and nonlinearities.
pub fn battery() -> Vec<(&'static str, EllipticProblem)> {
    let pw = |m: f64| Nonlinearity::Power { m };
    let make = |names: &[&str], edges: Vec<Edge>| MetricGraph::build(GraphSpec::new(names, edges)).unwrap();
    let graphs = vec![
        ("single-edge", make(&["a", "b"], vec![Edge::new("e", "a", "b", 1.0, 3.0).with_cells(32).with_gamma(pw(2.0))])),
        (
            "path-2",
            make(
                &["a", "b", "c"],
                vec![
                    Edge::new("e1", "a", "b", 1.0, 2.0).with_cells(32),
                    Edge::new("e2", "b", "c", 0.6, 1.5).with_cells(24).with_gamma(pw(0.5)),
                ],
            ),
        ),
        (
            "star-3",
            make(
                &["c", "l1", "l2", "l3"],
                vec![
                    Edge::new("e1", "c", "l1", 1.0, 2.0).with_cells(32),
                    Edge::new("e2", "c", "l2", 0.8, 2.0).with_cells(24).with_gamma(pw(2.0)),
                    Edge::new("e3", "l3", "c", 1.2, 3.0).with_cells(32).with_gamma(pw(0.5)),
                ],
            ),
        ),
        (
            "triangle",
            make(
                &["a", "b", "c"],
                vec![
                    Edge::new("ab", "a", "b", 1.0, 2.0).with_cells(24),
                    Edge::new("bc", "b", "c", 0.9, 3.0).with_cells(24).with_gamma(pw(2.0)),
                    Edge::new("ca", "c", "a", 1.1, 1.5).with_cells(24),
                ],
            ),
        ),
        (
            "tree-5",
            make(
                &["r", "a", "b", "c", "d", "f"],
                vec![
                    Edge::new("e1", "r", "a", 1.0, 2.0).with_cells(24),
                    Edge::new("e2", "a", "b", 0.7, 3.0).with_cells(20).with_gamma(pw(0.5)),
                    Edge::new("e3", "c", "a", 0.9, 1.5).with_cells(20),
                    Edge::new("e4", "r", "d", 0.6, 4.0).with_cells(16).with_gamma(pw(2.0)),
                    Edge::new("e5", "f", "r", 1.2, 2.0).with_cells(24),
                ],
            ),
        ),
    ];
    graphs
        .into_iter()
        .map(|(name, graph)| {
            let g = EdgeFunction::from_fn(&graph, |e, x| 0.4 * (e as f64 + 1.0) * (2.5 * x + e as f64).sin() + 0.1);
            let omega = (0..graph.vertex_count()).map(|v| 0.15 * ((v * 7 % 5) as f64 - 2.0)).collect();
            (name, EllipticProblem::new(graph, g, omega).unwrap())
        })
        .collect()
}

/// `∥v_monolithic − v_gluing∥_∞` on one battery problem.
pub fn method_agreement(prob: &EllipticProblem, cfg: &SolverConfig) -> Result<f64, DiagnosticError> {
    let a = solve_monolithic(prob, cfg)?;
    let b = solve(prob, cfg, Method::Gluing)?;
    Ok(a.v.max_abs_diff(&b.v))
}

/// Default ε grid: 21 points in `[−5, 5]`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..21).map(|i| -5.0 + 0.5 * i as f64).collect()
}

/// Single-vertex sweep at the first vertex and, where there are two boundary
/// vertices, a compensated sweep between them.
pub fn flux_sweeps(prob: &EllipticProblem, cfg: &SolverConfig, seed: u64) -> Result<Vec<PropertyReport>, DiagnosticError> {
    let grid = default_eps_grid();
    let mut out = vec![monotone_flux_sweep(prob, Sweep::Single(0), &grid, cfg, seed)?];
    let bd = prob.graph.boundary_vertices();
    if bd.len() >= 2 {
        let pair = Sweep::Pair { plus: bd[bd.len() - 1], minus: bd[0] };
        out.push(monotone_flux_sweep(prob, pair, &grid, cfg, seed)?);
    }
    Ok(out)
}

/// Resolvent with zero forcing: `∥v_τ − g∥₁` must decrease strictly along
/// `τ = 1, 0.1, 0.01, 0.001`, and the resolvent must contract positive parts.
pub fn resolvent_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    use crate::graph_elliptic::resolvent;
    let mut rng = trial_rng(seed, i);
    let opts = RandomGraphOptions {
        max_edges: 4,
        ..Default::default()
    };
    let graph = random_graph(&mut rng, &opts);
    let nv = graph.vertex_count();
    let g1 = random_load(&mut rng, &graph);
    let g2 = random_load(&mut rng, &graph);
    let zero = EdgeFunction::zeros(&graph);
    let zw = vec![0.0; nv];
    let mut violations = Vec::new();
    let mut last = f64::INFINITY;
    for tau in [1.0, 0.1, 0.01, 0.001] {
        let s1 = resolvent(&graph, tau, &g1, &zero, &zw, cfg, Method::Monolithic, None)?;
        let dist = l1_norm(&graph, &diff(&s1.v, &g1)).unwrap_or(f64::NAN);
        // Strict decrease, measured relative to the contraction tolerance.
        violations.push(dist - last + 1e-14);
        last = dist;
        let s2 = resolvent(&graph, tau, &g2, &zero, &zw, cfg, Method::Monolithic, None)?;
        let lhs = positive_part_integral(&graph, &diff(&s1.v, &s2.v)).unwrap_or(f64::NAN);
        let rhs = positive_part_integral(&graph, &diff(&g1, &g2)).unwrap_or(f64::NAN);
        violations.push(lhs - rhs);
    }
    Ok(PropertyReport::new("resolvent", trial_seed(seed, i), 1e-8, violations))
}

/// Random parabolic setup used by the contraction, energy and integral
/// suites.
pub struct ParabolicCase {
    pub graph: MetricGraph,
    pub v0: EdgeFunction,
    pub schedule: Schedule,
    pub grid: TimeGrid,
}

pub fn random_parabolic_case(rng: &mut impl Rng, linear: bool) -> ParabolicCase {
    let opts = if linear {
        RandomGraphOptions {
            max_edges: 4,
            exponents: vec![2.0],
            gammas: vec![Nonlinearity::Identity],
            ..Default::default()
        }
    } else {
        RandomGraphOptions {
            max_edges: 4,
            ..Default::default()
        }
    };
    let graph = random_graph(rng, &opts);
    let v0 = random_load(rng, &graph);
    let f = random_load(rng, &graph);
    let mut schedule = Schedule::zero(&graph);
    for (k, e) in graph.edges().iter().enumerate() {
        let _ = e;
        schedule = schedule.with_forcing(k, Forcing::Nodal(f.edge(k).to_vec()));
    }
    for v in 0..graph.vertex_count() {
        schedule = schedule.with_flux(v, VertexFlux::Constant(rng.random_range(-0.3..0.3)));
    }
    ParabolicCase {
        graph,
        v0,
        schedule,
        grid: TimeGrid::uniform(0.2, 0.02).expect("fixed grid"),
    }
}

pub fn contraction_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    let mut rng = trial_rng(seed, i);
    let case = random_parabolic_case(&mut rng, false);
    let bump = random_load(&mut rng, &case.graph);
    let v0b = case.v0.zip_with(&bump, |a, b| a + 0.3 * b);
    let mut other = case.schedule.clone();
    for v in 0..case.graph.vertex_count() {
        other = other.with_flux(v, VertexFlux::Constant(rng.random_range(-0.3..0.3)));
    }
    let t1 = solve_parabolic(&case.graph, &case.v0, &case.schedule, &case.grid, cfg)?;
    let t2 = solve_parabolic(&case.graph, &v0b, &other, &case.grid, cfg)?;
    let mut r = contraction_test(&case.graph, (&t1, &case.schedule), (&t2, &other), trial_seed(seed, i))?;
    // Ordered data must give ordered states.
    let mut lower = case.schedule.clone();
    for v in 0..case.graph.vertex_count() {
        let w = case.schedule.omega[v].at(0.0).unwrap_or(0.0);
        lower = lower.with_flux(v, VertexFlux::Constant(w - 0.1));
    }
    let v0_low = case.v0.zip_with(&bump, |a, b| a - b.abs());
    let t3 = solve_parabolic(&case.graph, &v0_low, &lower, &case.grid, cfg)?;
    let order = t3
        .records
        .iter()
        .zip(&t1.records)
        .map(|(lo, hi)| lo.v.zip_with(&hi.v, |a, b| a - b).values().iter().flatten().fold(f64::NEG_INFINITY, |m, &x| m.max(x)))
        .fold(f64::NEG_INFINITY, f64::max);
    r.worst_violation = r.worst_violation.max(order - 1e-8 + r.tolerance);
    r.passed = r.worst_violation <= r.tolerance;
    Ok(r)
}

/// Energy ledger residuals on a random run, plus the decay bound for the
/// same run without data.
pub fn energy_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    let mut rng = trial_rng(seed, i);
    let case = random_parabolic_case(&mut rng, false);
    let traj = solve_parabolic(&case.graph, &case.v0, &case.schedule, &case.grid, cfg)?;
    let mut violations: Vec<f64> = energy_ledger(&traj).into_iter().map(|(r, s)| r / s).collect();
    let decay = solve_parabolic(&case.graph, &case.v0, &Schedule::zero(&case.graph), &case.grid, cfg)?;
    violations.push(decay.last().energy - decay.records[0].energy);
    Ok(PropertyReport::new("energy-ledger", trial_seed(seed, i), 1e-8, violations))
}

pub fn integral_trial(seed: u64, i: usize, cfg: &SolverConfig) -> Result<PropertyReport, DiagnosticError> {
    let mut rng = trial_rng(seed, i);
    let case = random_parabolic_case(&mut rng, true);
    let traj = solve_parabolic(&case.graph, &case.v0, &case.schedule, &case.grid, cfg)?;
    let samples = (0..5)
        .map(|_| {
            let g = random_load(&mut rng, &case.graph);
            let w = random_flux(&mut rng, &case.graph);
            operator_sample(&case.graph, g, w, cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    integral_solution_check(&case.graph, &traj, &case.schedule, &samples, trial_seed(seed, i))
}

/// Single edge `ℓ = 1` and a 2-path of total length 2, both `p = 2` at 256
/// cells per unit length: `λ = π` and `λ = π/2`.
pub fn poincare_checks(seed: u64) -> Vec<PropertyReport> {
    let one = MetricGraph::build(GraphSpec::new(&["a", "b"], vec![Edge::new("e", "a", "b", 1.0, 2.0).with_cells(256)]))
        .unwrap();
    let two = MetricGraph::build(GraphSpec::new(
        &["a", "b", "c"],
        vec![
            Edge::new("e1", "a", "b", 1.2, 2.0).with_cells(256),
            Edge::new("e2", "b", "c", 0.8, 2.0).with_cells(256),
        ],
    ))
    .unwrap();
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    for (name, g, expect) in [("poincare-edge", one, pi), ("poincare-path", two, pi / 2.0)] {
        let est = poincare_estimate(&g, &PBar::of(&g), 0, seed);
        out.push(PropertyReport::new(name, seed, 0.01, [(est.lambda - expect).abs()]));
    }
    out
}

/// Runs a named suite with `trials` random draws (where applicable),
/// trials in parallel and reports in trial order.
pub fn run_suite(name: &str, seed: u64, trials: usize, cfg: &SolverConfig) -> Result<Vec<PropertyReport>, DiagnosticError> {
    type Trial = fn(u64, usize, &SolverConfig) -> Result<PropertyReport, DiagnosticError>;
    let randomized = |f: Trial| -> Result<Vec<PropertyReport>, DiagnosticError> {
        (0..trials).into_par_iter().map(|i| f(seed, i, cfg)).collect()
    };
    match name {
        "mass-balance" => randomized(mass_balance_trial),
        "comparison" => randomized(comparison_trial),
        "linf" => randomized(linf_trial),
        "resolvent" => randomized(resolvent_trial),
        "contraction" => randomized(contraction_trial),
        "energy" => randomized(energy_trial),
        "integral" => randomized(integral_trial),
        "methods" => battery()
            .par_iter()
            .map(|(label, prob)| {
                let d = method_agreement(prob, cfg)?;
                Ok(PropertyReport::new(format!("methods-{label}"), seed, 1e-6, [d]))
            })
            .collect(),
        "flux-sweep" => {
            let nested: Vec<Vec<PropertyReport>> = battery()
                .par_iter()
                .map(|(label, prob)| {
                    flux_sweeps(prob, cfg, seed).map(|rs| {
                        rs.into_iter()
                            .map(|mut r| {
                                r.name = format!("{}-{label}", r.name);
                                r
                            })
                            .collect()
                    })
                })
                .collect::<Result<_, DiagnosticError>>()?;
            Ok(nested.into_iter().flatten().collect())
        }
        "poincare" => Ok(poincare_checks(seed)),
        other => Err(DiagnosticError::UnknownSuite(other.to_string())),
    }
}

/// Temporal order on the smooth heat configuration: a 2-path with
/// `v0 = cos(πx)` on the first edge continued smoothly.
pub fn heat_temporal_order(cfg: &SolverConfig) -> Result<TemporalOrder, DiagnosticError> {
    let graph = MetricGraph::build(GraphSpec::new(
        &["a", "b", "c"],
        vec![
            Edge::new("e1", "a", "b", 1.0, 2.0).with_cells(32),
            Edge::new("e2", "b", "c", 1.0, 2.0).with_cells(32),
        ],
    ))
    .unwrap();
    let v0 = EdgeFunction::from_fn(&graph, |e, x| (std::f64::consts::PI * (x + e as f64) / 2.0).cos());
    Ok(richardson_order(&graph, &Schedule::zero(&graph), &v0, 0.5, 0.05, cfg)?)
}
