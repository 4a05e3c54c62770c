//! Elliptic problem on the whole graph:
//! `α γ_e(u) − (ρ_{p_e}(u'))' = g` on every edge, `u` continuous, and
//! vertex flux `ω_v`. Solved either by one global Newton iteration or by
//! recursively gluing single-edge solutions along a shooting parameter.

use std::collections::BTreeMap;

use crate::edge_solver::{find_increasing_root, solve_edge_bvp_from, EdgeBvp};
use crate::expr::ExprError;
use crate::grid_functions::{check_shape, node_position, node_weight, EdgeFunction, GraphFunction};
use crate::metric_graph::{EdgeId, GraphSpec, MetricGraph, Role, VertexId};
use crate::newton::{self, EdgeBlock, Problem, SolveError, SolverConfig, Stage};

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub graph: MetricGraph,
    /// Nodal load per edge.
    pub g: EdgeFunction,
    /// Flux per vertex index.
    pub omega: Vec<f64>,
    pub alpha: f64,
}

impl EllipticProblem {
    pub fn new(graph: MetricGraph, g: EdgeFunction, omega: Vec<f64>) -> Result<Self, SolveError> {
        check_shape(&graph, &g).map_err(|e| SolveError::InvalidProblem(e.to_string()))?;
        if omega.len() != graph.vertex_count() {
            return Err(SolveError::ShapeMismatch {
                expected: graph.vertex_count(),
                found: omega.len(),
            });
        }
        Ok(Self {
            graph,
            g,
            omega,
            alpha: 1.0,
        })
    }

    /// Zero vertex fluxes.
    pub fn with_load(graph: MetricGraph, g: EdgeFunction) -> Result<Self, SolveError> {
        let nv = graph.vertex_count();
        Self::new(graph, g, vec![0.0; nv])
    }

    /// Fluxes given by vertex id; vertices not listed get zero.
    pub fn with_flux_map(
        graph: MetricGraph,
        g: EdgeFunction,
        omega: &BTreeMap<VertexId, f64>,
    ) -> Result<Self, SolveError> {
        let mut w = vec![0.0; graph.vertex_count()];
        for (id, value) in omega {
            w[graph.vertex_index(id)?] = *value;
        }
        Self::new(graph, g, w)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// `1 + |∫g| + Σ|ω|`, the natural size of the mass balance terms.
    pub fn scale(&self) -> f64 {
        let ig = crate::grid_functions::integrate(&self.graph, &self.g).unwrap_or(f64::NAN);
        1.0 + ig.abs() + self.omega.iter().map(|w| w.abs()).sum::<f64>()
    }

    fn validate(&self) -> Result<(), SolveError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(SolveError::InvalidProblem(format!("alpha = {}", self.alpha)));
        }
        if self.omega.iter().any(|w| !w.is_finite())
            || self.g.values().iter().flatten().any(|x| !x.is_finite())
        {
            return Err(SolveError::InvalidProblem("non-finite data".into()));
        }
        Ok(())
    }

    pub(crate) fn discrete(&self) -> Problem<'_> {
        let blocks = self
            .graph
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (from, to) = self.graph.endpoints(k);
                EdgeBlock {
                    cells: e.cells,
                    h: e.h(),
                    p: e.p,
                    gamma: &e.gamma,
                    load: self.g.edge(k),
                    from,
                    to,
                }
            })
            .collect();
        Problem::new(blocks, self.graph.vertex_count(), self.omega.clone(), self.alpha)
    }
}

/// Nodal samples of every edge source at time `t`.
pub fn sample_sources(graph: &MetricGraph, t: f64) -> Result<EdgeFunction, ExprError> {
    EdgeFunction::try_from_fn(graph, |e, x| graph.edge(e).source.eval(t, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Monolithic,
    Gluing,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Monolithic => "monolithic",
            Method::Gluing => "gluing",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub u: GraphFunction,
    /// `γ_e(u)` edge by edge; may jump at vertices.
    pub v: EdgeFunction,
    /// `(a_e, b_e)` per edge index: outward fluxes at the initial and
    /// terminal ends.
    pub edge_fluxes: Vec<(f64, f64)>,
    pub residual_sup: f64,
    pub method: Method,
    /// `α∫γ̄(u) − ∫g − Σω`.
    pub mass_gap: f64,
    /// `Σ_e {flux}_e(v) − ω_v` per vertex.
    pub kirchhoff_gaps: Vec<f64>,
    /// Newton iterations (monolithic) or edge solves (gluing).
    pub work: usize,
}

pub fn solve(prob: &EllipticProblem, cfg: &SolverConfig, method: Method) -> Result<EllipticSolution, SolveError> {
    match method {
        Method::Monolithic => solve_monolithic(prob, cfg),
        Method::Gluing => solve_by_gluing(prob, cfg),
    }
}

/// Global damped Newton on all unknowns at once.
pub fn solve_monolithic(prob: &EllipticProblem, cfg: &SolverConfig) -> Result<EllipticSolution, SolveError> {
    solve_monolithic_from(prob, cfg, None)
}

pub fn solve_monolithic_from(
    prob: &EllipticProblem,
    cfg: &SolverConfig,
    warm: Option<&GraphFunction>,
) -> Result<EllipticSolution, SolveError> {
    prob.validate()?;
    let disc = prob.discrete();
    let warm = warm.map(|w| w.to_dofs());
    let solved = newton::solve(&disc, cfg, warm.as_deref())?;
    let u = GraphFunction::from_dofs(&prob.graph, &solved.u);
    Ok(finalize(prob, u, Method::Monolithic, solved.newton_iters, cfg))
}

fn finalize(
    prob: &EllipticProblem,
    u: GraphFunction,
    method: Method,
    work: usize,
    cfg: &SolverConfig,
) -> EllipticSolution {
    use crate::grid_functions::Nodal;
    let stage = Stage::final_stage(cfg);
    let disc = prob.discrete();
    let mut r = Vec::new();
    newton::residual(&disc, stage, &u.to_dofs(), &mut r);
    let residual_sup = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let graph = &prob.graph;
    let v = EdgeFunction::from_values(
        (0..graph.edge_count())
            .map(|k| u.edge_values(k).iter().map(|&x| graph.edge(k).gamma.eval(x)).collect())
            .collect(),
    );
    let mut mass_gap = -prob.omega.iter().sum::<f64>();
    let mut edge_fluxes = Vec::with_capacity(graph.edge_count());
    for (k, e) in graph.edges().iter().enumerate() {
        let n = e.cells;
        let h = e.h();
        let nodes = u.edge_values(k);
        let reaction =
            |j: usize| node_weight(h, n, j) * (prob.alpha * v.at(k, j) - prob.g.at(k, j));
        for j in 0..=n {
            mass_gap += reaction(j);
        }
        // Half-cell balance at each end recovers the boundary flux to the
        // accuracy of the discrete equation.
        let law = stage.law(e.p);
        let a = -law.rho((nodes[1] - nodes[0]) / h) + reaction(0);
        let b = law.rho((nodes[n] - nodes[n - 1]) / h) + reaction(n);
        edge_fluxes.push((a, b));
    }
    let kirchhoff_gaps = (0..graph.vertex_count())
        .map(|vx| {
            graph
                .incident(vx)
                .iter()
                .map(|&(k, role)| match role {
                    Role::Initial => edge_fluxes[k].0,
                    Role::Terminal => edge_fluxes[k].1,
                })
                .sum::<f64>()
                - prob.omega[vx]
        })
        .collect();
    EllipticSolution {
        u,
        v,
        edge_fluxes,
        residual_sup,
        method,
        mass_gap,
        kirchhoff_gaps,
        work,
    }
}

/// Boundary fluxes `(a_e, b_e)` keyed by edge id. Their signed sums at each
/// vertex reproduce `ω_v`.
pub fn decompose_edge_fluxes(graph: &MetricGraph, sol: &EllipticSolution) -> BTreeMap<EdgeId, (f64, f64)> {
    graph
        .edges()
        .iter()
        .zip(&sol.edge_fluxes)
        .map(|(e, &ab)| (e.id.clone(), ab))
        .collect()
}

/// One implicit Euler step: solves `v/τ − Δ_{p̄}u = v_prev/τ + f` with vertex
/// flux `ω`.
#[allow(clippy::too_many_arguments)]
pub fn resolvent(
    graph: &MetricGraph,
    tau: f64,
    v_prev: &EdgeFunction,
    f: &EdgeFunction,
    omega: &[f64],
    cfg: &SolverConfig,
    method: Method,
    warm: Option<&GraphFunction>,
) -> Result<EllipticSolution, SolveError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SolveError::InvalidProblem(format!("step {tau}")));
    }
    let g = v_prev.zip_with(f, |v, f| v / tau + f);
    let prob = EllipticProblem::new(graph.clone(), g, omega.to_vec())?.with_alpha(1.0 / tau);
    match method {
        Method::Monolithic => solve_monolithic_from(&prob, cfg, warm),
        Method::Gluing => solve_by_gluing(&prob, cfg),
    }
}

/// Recursive construction: peel a boundary edge if there is one, otherwise
/// cut a cycle edge in two, and shoot on the transferred flux so that the
/// two sides agree at the joint.
pub fn solve_by_gluing(prob: &EllipticProblem, cfg: &SolverConfig) -> Result<EllipticSolution, SolveError> {
    prob.validate()?;
    let mut plan = Plan::build(&prob.graph)?;
    let mut ctx = Glue { cfg, solves: 0 };
    let u = plan.solve(&mut ctx, &prob.graph, &prob.g, &prob.omega, prob.alpha, cfg.match_tol)?;
    Ok(finalize(prob, u, Method::Gluing, ctx.solves, cfg))
}

struct Glue<'c> {
    cfg: &'c SolverConfig,
    solves: usize,
}

impl Glue<'_> {
    fn inner_tol(&self) -> f64 {
        (self.cfg.match_tol * 1e-3).max(1e-13)
    }
}

enum Plan {
    Edge { warm: Option<Vec<f64>> },
    Peel(Box<Peel>),
    Cut(Box<Cut>),
}

/// Leaf vertex `leaf` hangs off `w` through `edge`.
struct Peel {
    leaf: usize,
    w: usize,
    edge: usize,
    leaf_is_terminal: bool,
    reduced: MetricGraph,
    /// Reduced vertex / edge index → parent index.
    vmap: Vec<usize>,
    emap: Vec<usize>,
    w_reduced: usize,
    child: Plan,
    eps: f64,
    step: f64,
    edge_warm: Option<Vec<f64>>,
}

/// `edge` is opened at node `split` into two halves ending at new vertices.
struct Cut {
    edge: usize,
    split: usize,
    cut: MetricGraph,
    va: usize,
    vb: usize,
    child: Plan,
    eps: f64,
    step: f64,
}

impl Plan {
    fn build(graph: &MetricGraph) -> Result<Plan, SolveError> {
        if graph.edge_count() == 1 {
            return Ok(Plan::Edge { warm: None });
        }
        let leaf = graph
            .boundary_vertices()
            .into_iter()
            .min_by(|&a, &b| graph.vertex_id(a).cmp(graph.vertex_id(b)));
        match leaf {
            Some(leaf) => Ok(Plan::Peel(Box::new(Peel::build(graph, leaf)?))),
            None => Ok(Plan::Cut(Box::new(Cut::build(graph)?))),
        }
    }

    fn solve(
        &mut self,
        ctx: &mut Glue<'_>,
        graph: &MetricGraph,
        g: &EdgeFunction,
        omega: &[f64],
        alpha: f64,
        tol: f64,
    ) -> Result<GraphFunction, SolveError> {
        match self {
            Plan::Edge { warm } => {
                let (from, to) = graph.endpoints(0);
                let e = graph.edge(0);
                let bvp = EdgeBvp {
                    length: e.length,
                    p: e.p,
                    gamma: e.gamma.clone(),
                    g: g.edge(0).to_vec(),
                    a: omega[from],
                    b: omega[to],
                    alpha,
                };
                let sol = solve_edge_bvp_from(&bvp, ctx.cfg, warm.as_deref())?;
                ctx.solves += 1;
                let n = e.cells;
                let mut vertex = vec![0.0; 2];
                vertex[from] = sol.u[0];
                vertex[to] = sol.u[n];
                let u = GraphFunction::from_parts(graph, vertex, vec![sol.u[1..n].to_vec()]);
                *warm = Some(sol.u);
                Ok(u)
            }
            Plan::Peel(peel) => peel.solve(ctx, graph, g, omega, alpha, tol),
            Plan::Cut(cut) => cut.solve(ctx, graph, g, omega, alpha, tol),
        }
    }
}

impl Peel {
    fn build(graph: &MetricGraph, leaf: usize) -> Result<Peel, SolveError> {
        let (edge, role) = graph.incident(leaf)[0];
        let (from, to) = graph.endpoints(edge);
        let w = if from == leaf { to } else { from };
        let vmap: Vec<usize> = (0..graph.vertex_count()).filter(|&v| v != leaf).collect();
        let emap: Vec<usize> = (0..graph.edge_count()).filter(|&k| k != edge).collect();
        let spec = GraphSpec {
            vertices: vmap.iter().map(|&v| graph.vertex_id(v).clone()).collect(),
            edges: emap.iter().map(|&k| graph.edge(k).clone()).collect(),
        };
        let reduced = MetricGraph::build(spec)?;
        let w_reduced = vmap.iter().position(|&v| v == w).expect("w survives");
        let child = Plan::build(&reduced)?;
        Ok(Peel {
            leaf,
            w,
            edge,
            leaf_is_terminal: role == Role::Terminal,
            reduced,
            vmap,
            emap,
            w_reduced,
            child,
            eps: 0.0,
            step: 1.0,
            edge_warm: None,
        })
    }

    fn solve(
        &mut self,
        ctx: &mut Glue<'_>,
        graph: &MetricGraph,
        g: &EdgeFunction,
        omega: &[f64],
        alpha: f64,
        tol: f64,
    ) -> Result<GraphFunction, SolveError> {
        let g_red = EdgeFunction::from_values(self.emap.iter().map(|&k| g.edge(k).to_vec()).collect());
        let base_red: Vec<f64> = self.vmap.iter().map(|&v| omega[v]).collect();
        let e = graph.edge(self.edge);
        let n = e.cells;
        let mut bvp = EdgeBvp {
            length: e.length,
            p: e.p,
            gamma: e.gamma.clone(),
            g: g.edge(self.edge).to_vec(),
            a: 0.0,
            b: 0.0,
            alpha,
        };
        let omega_leaf = omega[self.leaf];
        let inner = ctx.inner_tol();
        let cfg = ctx.cfg;
        let (center, step) = (self.eps, self.step);
        let Peel {
            reduced,
            child,
            edge_warm,
            w_reduced,
            leaf_is_terminal,
            ..
        } = self;
        let (w_red, leaf_terminal) = (*w_reduced, *leaf_is_terminal);
        let root = find_increasing_root(
            |eps| {
                let mut omega_red = base_red.clone();
                omega_red[w_red] += eps;
                let u_red = child.solve(ctx, reduced, &g_red, &omega_red, alpha, inner)?;
                if leaf_terminal {
                    bvp.a = -eps;
                    bvp.b = omega_leaf;
                } else {
                    bvp.a = omega_leaf;
                    bvp.b = -eps;
                }
                let sol = solve_edge_bvp_from(&bvp, ctx.cfg, edge_warm.as_deref())?;
                ctx.solves += 1;
                let at_w = if leaf_terminal { sol.u[0] } else { sol.u[n] };
                let phi = u_red.vertex_value(w_red) - at_w;
                *edge_warm = Some(sol.u.clone());
                Ok((phi, (u_red, sol.u)))
            },
            center,
            step,
            tol,
            cfg,
        )?;
        self.step = (2.0 * (root.x - center).abs()).clamp(1e-6, 1.0);
        self.eps = root.x;
        let (u_red, edge_u) = root.state;
        self.edge_warm = Some(edge_u.clone());

        let mut vertex = vec![0.0; graph.vertex_count()];
        let mut interior = vec![Vec::new(); graph.edge_count()];
        for (i, &v) in self.vmap.iter().enumerate() {
            vertex[v] = u_red.vertex_value(i);
        }
        for (i, &k) in self.emap.iter().enumerate() {
            interior[k] = u_red.interior(i).to_vec();
        }
        vertex[self.leaf] = if self.leaf_is_terminal { edge_u[n] } else { edge_u[0] };
        debug_assert_eq!(vertex[self.w], u_red.vertex_value(self.w_reduced));
        interior[self.edge] = edge_u[1..n].to_vec();
        Ok(GraphFunction::from_parts(graph, vertex, interior))
    }
}

impl Cut {
    fn build(graph: &MetricGraph) -> Result<Cut, SolveError> {
        let edge = graph
            .cycle_edges()
            .into_iter()
            .filter(|&k| graph.edge(k).cells >= 2)
            .max_by(|&a, &b| graph.edge(a).id.cmp(&graph.edge(b).id))
            .ok_or_else(|| SolveError::InvalidProblem("no cycle edge with two or more cells".into()))?;
        let id = graph.edge(edge).id.clone();
        let (halves, mid, _) = graph.split_edge(&id, 0.5)?;
        let split = halves.edge(edge).cells;
        let mut spec = halves.spec();
        let vb = halves.fresh_vertex_id(&format!("{}'", mid));
        spec.edges[edge + 1].from = vb.clone();
        spec.vertices.push(vb);
        let cut = MetricGraph::build(spec)?;
        let va = graph.vertex_count();
        let child = Plan::build(&cut)?;
        Ok(Cut {
            edge,
            split,
            cut,
            va,
            vb: va + 1,
            child,
            eps: 0.0,
            step: 1.0,
        })
    }

    fn solve(
        &mut self,
        ctx: &mut Glue<'_>,
        graph: &MetricGraph,
        g: &EdgeFunction,
        omega: &[f64],
        alpha: f64,
        tol: f64,
    ) -> Result<GraphFunction, SolveError> {
        let k = self.edge;
        let s = self.split;
        let full = g.edge(k);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(graph.edge_count() + 1);
        for i in 0..graph.edge_count() {
            if i == k {
                rows.push(full[..=s].to_vec());
                rows.push(full[s..].to_vec());
            } else {
                rows.push(g.edge(i).to_vec());
            }
        }
        let g_cut = EdgeFunction::from_values(rows);
        let (va, vb) = (self.va, self.vb);
        let inner = ctx.inner_tol();
        let cfg = ctx.cfg;
        let (center, step) = (self.eps, self.step);
        let Cut { cut, child, .. } = self;
        let root = find_increasing_root(
            |eps| {
                let mut w = omega.to_vec();
                w.push(eps);
                w.push(-eps);
                let u = child.solve(ctx, cut, &g_cut, &w, alpha, inner)?;
                Ok((u.vertex_value(va) - u.vertex_value(vb), u))
            },
            center,
            step,
            tol,
            cfg,
        )?;
        self.step = (2.0 * (root.x - center).abs()).clamp(1e-6, 1.0);
        self.eps = root.x;
        let u = root.state;

        let nv = graph.vertex_count();
        let vertex = u.vertex_values()[..nv].to_vec();
        let mut interior = Vec::with_capacity(graph.edge_count());
        for i in 0..graph.edge_count() {
            if i < k {
                interior.push(u.interior(i).to_vec());
            } else if i == k {
                let mut row = u.interior(k).to_vec();
                row.push(0.5 * (u.vertex_value(va) + u.vertex_value(vb)));
                row.extend_from_slice(u.interior(k + 1));
                interior.push(row);
            } else {
                interior.push(u.interior(i + 1).to_vec());
            }
        }
        Ok(GraphFunction::from_parts(graph, vertex, interior))
    }
}

/// Nodal positions of edge `k`.
pub fn edge_nodes(graph: &MetricGraph, k: usize) -> Vec<f64> {
    let e = graph.edge(k);
    (0..=e.cells).map(|j| node_position(e.length, e.cells, j)).collect()
}
