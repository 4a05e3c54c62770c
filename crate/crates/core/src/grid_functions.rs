//! Piecewise-linear nodal functions on the edge grids of a metric graph.
//!
//! Each edge `e` carries the uniform grid `x_j = j·h_e`, `j = 0..=N_e`, node 0
//! sitting on the initial vertex. Two storage flavours exist:
//!
//! * [`EdgeFunction`]: independent nodal arrays per edge, traces at a vertex
//!   may disagree (used for `v = γ̄(u)`, loads and fluxes);
//! * [`GraphFunction`]: one shared value per vertex plus interior nodes per
//!   edge, so continuity at vertices holds by construction (used for `u`).
//!
//! Integrals use the composite trapezoid rule, whose weights coincide with
//! the lumped masses used by the solvers.

use thiserror::Error;

use crate::metric_graph::{MetricGraph, Role};
use crate::nonlinearity::FluxLaw;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid function does not match the graph discretisation")]
    GridMismatch,
    #[error("vertex {vertex} is not incident to edge {edge}")]
    NotIncident { edge: usize, vertex: usize },
    #[error("unknown vertex index {0}")]
    UnknownVertex(usize),
    #[error("the k-grid is empty")]
    EmptyKGrid,
    #[error("traces disagree at vertex {vertex} by {gap:e}")]
    TraceMismatch { vertex: usize, gap: f64 },
}

/// Read access to nodal values, shared by both storage flavours.
pub trait Nodal {
    fn edge_count(&self) -> usize;
    /// Number of nodes on edge `e` (cells + 1).
    fn nodes(&self, e: usize) -> usize;
    fn at(&self, e: usize, j: usize) -> f64;

    fn edge_values(&self, e: usize) -> Vec<f64> {
        (0..self.nodes(e)).map(|j| self.at(e, j)).collect()
    }
}

/// Nodal values per edge without coupling at vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction {
    values: Vec<Vec<f64>>,
}

impl EdgeFunction {
    pub fn zeros(graph: &MetricGraph) -> Self {
        Self {
            values: graph.edges().iter().map(|e| vec![0.0; e.cells + 1]).collect(),
        }
    }

    pub fn constant(graph: &MetricGraph, c: f64) -> Self {
        Self::from_fn(graph, |_, _| c)
    }

    /// Samples `f(edge, x)` at every node.
    pub fn from_fn(graph: &MetricGraph, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let values = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| (0..=e.cells).map(|j| f(k, node_position(e.length, e.cells, j))).collect())
            .collect();
        Self { values }
    }

    pub fn try_from_fn<E>(
        graph: &MetricGraph,
        mut f: impl FnMut(usize, f64) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let mut values = Vec::with_capacity(graph.edge_count());
        for (k, e) in graph.edges().iter().enumerate() {
            let mut row = Vec::with_capacity(e.cells + 1);
            for j in 0..=e.cells {
                row.push(f(k, node_position(e.length, e.cells, j))?);
            }
            values.push(row);
        }
        Ok(Self { values })
    }

    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        Self { values }
    }

    pub fn edge(&self, e: usize) -> &[f64] {
        &self.values[e]
    }

    pub fn edge_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.values[e]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|row| row.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// Edge-aware map: `f(edge, value)`.
    pub fn map_edges(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, row)| row.iter().map(|&x| f(k, x)).collect())
                .collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

impl Nodal for EdgeFunction {
    fn edge_count(&self) -> usize {
        self.values.len()
    }

    fn nodes(&self, e: usize) -> usize {
        self.values[e].len()
    }

    fn at(&self, e: usize, j: usize) -> f64 {
        self.values[e][j]
    }

    fn edge_values(&self, e: usize) -> Vec<f64> {
        self.values[e].clone()
    }
}

/// Continuous nodal function: one slot per vertex shared by incident edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction {
    vertex: Vec<f64>,
    interior: Vec<Vec<f64>>,
    ends: Vec<(usize, usize)>,
}

impl GraphFunction {
    pub fn zeros(graph: &MetricGraph) -> Self {
        Self {
            vertex: vec![0.0; graph.vertex_count()],
            interior: graph.edges().iter().map(|e| vec![0.0; e.cells - 1]).collect(),
            ends: (0..graph.edge_count()).map(|e| graph.endpoints(e)).collect(),
        }
    }

    pub fn constant(graph: &MetricGraph, c: f64) -> Self {
        let mut u = Self::zeros(graph);
        u.vertex.iter_mut().for_each(|x| *x = c);
        u.interior.iter_mut().flatten().for_each(|x| *x = c);
        u
    }

    /// Samples a continuous function given on each edge; vertex values are
    /// taken from the first incident edge.
    pub fn from_fn(graph: &MetricGraph, f: impl FnMut(usize, f64) -> f64) -> Self {
        let ef = EdgeFunction::from_fn(graph, f);
        Self::from_edge_function_unchecked(graph, &ef)
    }

    /// Builds from independent per-edge values, requiring the traces at each
    /// vertex to agree within `tol`.
    pub fn from_edge_function(
        graph: &MetricGraph,
        f: &EdgeFunction,
        tol: f64,
    ) -> Result<Self, GridError> {
        check_shape(graph, f)?;
        for v in 0..graph.vertex_count() {
            let traces: Vec<f64> = graph
                .incident(v)
                .iter()
                .map(|&(e, role)| trace(f, e, role))
                .collect();
            let lo = traces.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = traces.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > tol {
                return Err(GridError::TraceMismatch {
                    vertex: v,
                    gap: hi - lo,
                });
            }
        }
        Ok(Self::from_edge_function_unchecked(graph, f))
    }

    fn from_edge_function_unchecked(graph: &MetricGraph, f: &EdgeFunction) -> Self {
        let mut u = Self::zeros(graph);
        for v in 0..graph.vertex_count() {
            let (e, role) = graph.incident(v)[0];
            u.vertex[v] = trace(f, e, role);
        }
        for (k, row) in f.values.iter().enumerate() {
            let n = row.len() - 1;
            u.interior[k].copy_from_slice(&row[1..n]);
        }
        u
    }

    /// Assembles from vertex values and per-edge interior arrays.
    pub fn from_parts(graph: &MetricGraph, vertex: Vec<f64>, interior: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(vertex.len(), graph.vertex_count());
        Self {
            vertex,
            interior,
            ends: (0..graph.edge_count()).map(|e| graph.endpoints(e)).collect(),
        }
    }

    pub fn vertex_value(&self, v: usize) -> f64 {
        self.vertex[v]
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.vertex
    }

    pub fn interior(&self, e: usize) -> &[f64] {
        &self.interior[e]
    }

    pub fn to_edge_function(&self) -> EdgeFunction {
        EdgeFunction {
            values: (0..self.interior.len()).map(|e| self.edge_values(e)).collect(),
        }
    }

    /// Flat unknown vector: vertex values first, then interiors edge by edge.
    pub fn to_dofs(&self) -> Vec<f64> {
        let mut out = self.vertex.clone();
        for row in &self.interior {
            out.extend_from_slice(row);
        }
        out
    }

    pub fn from_dofs(graph: &MetricGraph, dofs: &[f64]) -> Self {
        let nv = graph.vertex_count();
        let mut offset = nv;
        let interior = graph
            .edges()
            .iter()
            .map(|e| {
                let row = dofs[offset..offset + e.cells - 1].to_vec();
                offset += e.cells - 1;
                row
            })
            .collect();
        Self::from_parts(graph, dofs[..nv].to_vec(), interior)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.vertex
            .iter()
            .zip(&other.vertex)
            .map(|(a, b)| (a - b).abs())
            .chain(
                self.interior
                    .iter()
                    .zip(&other.interior)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())),
            )
            .fold(0.0, f64::max)
    }
}

impl Nodal for GraphFunction {
    fn edge_count(&self) -> usize {
        self.interior.len()
    }

    fn nodes(&self, e: usize) -> usize {
        self.interior[e].len() + 2
    }

    fn at(&self, e: usize, j: usize) -> f64 {
        let n = self.interior[e].len() + 1;
        if j == 0 {
            self.vertex[self.ends[e].0]
        } else if j == n {
            self.vertex[self.ends[e].1]
        } else {
            self.interior[e][j - 1]
        }
    }
}

/// Per-edge exponents `p̄ = (p_e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PBar(pub Vec<f64>);

impl PBar {
    pub fn of(graph: &MetricGraph) -> Self {
        PBar(graph.edges().iter().map(|e| e.p).collect())
    }

    pub fn uniform(graph: &MetricGraph, p: f64) -> Self {
        PBar(vec![p; graph.edge_count()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpNorms {
    pub per_edge: Vec<f64>,
    /// Sum of the per-edge norms.
    pub total: f64,
}

pub(crate) fn node_position(length: f64, cells: usize, j: usize) -> f64 {
    if j == cells {
        length
    } else {
        length * j as f64 / cells as f64
    }
}

fn trace<F: Nodal + ?Sized>(f: &F, e: usize, role: Role) -> f64 {
    match role {
        Role::Initial => f.at(e, 0),
        Role::Terminal => f.at(e, f.nodes(e) - 1),
    }
}

pub fn check_shape<F: Nodal + ?Sized>(graph: &MetricGraph, f: &F) -> Result<(), GridError> {
    if f.edge_count() != graph.edge_count() {
        return Err(GridError::GridMismatch);
    }
    for (k, e) in graph.edges().iter().enumerate() {
        if f.nodes(k) != e.cells + 1 {
            return Err(GridError::GridMismatch);
        }
    }
    Ok(())
}

/// Trapezoid weight of node `j` on an edge with `cells` cells of width `h`.
#[inline]
pub fn node_weight(h: f64, cells: usize, j: usize) -> f64 {
    if j == 0 || j == cells {
        0.5 * h
    } else {
        h
    }
}

/// `∫_G f` by the composite trapezoid rule, summed in edge order.
pub fn integrate<F: Nodal + ?Sized>(graph: &MetricGraph, f: &F) -> Result<f64, GridError> {
    integrate_map(graph, f, |_, x| x)
}

/// `∫_G φ(e, f)` with nodal quadrature.
pub fn integrate_map<F: Nodal + ?Sized>(
    graph: &MetricGraph,
    f: &F,
    mut phi: impl FnMut(usize, f64) -> f64,
) -> Result<f64, GridError> {
    check_shape(graph, f)?;
    let mut total = 0.0;
    for (k, e) in graph.edges().iter().enumerate() {
        let h = e.h();
        let mut s = 0.0;
        for j in 0..=e.cells {
            s += node_weight(h, e.cells, j) * phi(k, f.at(k, j));
        }
        total += s;
    }
    Ok(total)
}

pub fn l1_norm<F: Nodal + ?Sized>(graph: &MetricGraph, f: &F) -> Result<f64, GridError> {
    integrate_map(graph, f, |_, x| x.abs())
}

/// `∫_G f⁺`.
pub fn positive_part_integral<F: Nodal + ?Sized>(
    graph: &MetricGraph,
    f: &F,
) -> Result<f64, GridError> {
    integrate_map(graph, f, |_, x| x.max(0.0))
}

pub fn lp_norms<F: Nodal + ?Sized>(
    graph: &MetricGraph,
    f: &F,
    pbar: &PBar,
) -> Result<LpNorms, GridError> {
    check_shape(graph, f)?;
    if pbar.0.len() != graph.edge_count() {
        return Err(GridError::GridMismatch);
    }
    let per_edge: Vec<f64> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let p = pbar.0[k];
            let h = e.h();
            let s: f64 = (0..=e.cells)
                .map(|j| node_weight(h, e.cells, j) * f.at(k, j).abs().powf(p))
                .sum();
            s.powf(1.0 / p)
        })
        .collect();
    let total = per_edge.iter().sum();
    Ok(LpNorms { per_edge, total })
}

/// `∥u'∥` per edge in `L^{p_e}`, with the exact cellwise-constant gradient.
pub fn gradient_lp_norms<F: Nodal + ?Sized>(
    graph: &MetricGraph,
    u: &F,
    pbar: &PBar,
) -> Result<LpNorms, GridError> {
    check_shape(graph, u)?;
    let per_edge: Vec<f64> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let p = pbar.0[k];
            let h = e.h();
            let s: f64 = (1..=e.cells)
                .map(|j| h * ((u.at(k, j) - u.at(k, j - 1)) / h).abs().powf(p))
                .sum();
            s.powf(1.0 / p)
        })
        .collect();
    let total = per_edge.iter().sum();
    Ok(LpNorms { per_edge, total })
}

/// `{z}_e(v)`: `+z_e(ℓ_e)` at the terminal vertex, `−z_e(0)` at the initial one.
pub fn upwind_value(
    graph: &MetricGraph,
    z: &EdgeFunction,
    e: usize,
    v: usize,
) -> Result<f64, GridError> {
    check_shape(graph, z)?;
    let (from, to) = graph.endpoints(e);
    let n = graph.edge(e).cells;
    if v == to {
        Ok(z.at(e, n))
    } else if v == from {
        Ok(-z.at(e, 0))
    } else {
        Err(GridError::NotIncident { edge: e, vertex: v })
    }
}

/// `∂_ν^{p̄} u(v) = Σ_e {ρ_{p_e}(u'_e)}_e(v)` using the gradient of the cell
/// adjacent to `v` on each incident edge.
pub fn kirchhoff_flux(
    graph: &MetricGraph,
    u: &GraphFunction,
    pbar: &PBar,
    v: usize,
) -> Result<f64, GridError> {
    check_shape(graph, u)?;
    if v >= graph.vertex_count() {
        return Err(GridError::UnknownVertex(v));
    }
    let mut total = 0.0;
    for &(e, role) in graph.incident(v) {
        let edge = graph.edge(e);
        let law = FluxLaw::exact(pbar.0[e]);
        let h = edge.h();
        let n = edge.cells;
        total += match role {
            Role::Terminal => law.rho((u.at(e, n) - u.at(e, n - 1)) / h),
            Role::Initial => -law.rho((u.at(e, 1) - u.at(e, 0)) / h),
        };
    }
    Ok(total)
}

/// Defect of the Green identity
/// `∫ z'w + ∫ z w' = Σ_v (Σ_e {z}_e(v)) w(v)` for piecewise-linear `z`, `w`,
/// with both integrals computed exactly.
pub fn greens_residual(
    graph: &MetricGraph,
    z: &EdgeFunction,
    w: &GraphFunction,
) -> Result<f64, GridError> {
    check_shape(graph, z)?;
    check_shape(graph, w)?;
    let mut lhs = 0.0;
    for (k, e) in graph.edges().iter().enumerate() {
        for j in 1..=e.cells {
            let (z0, z1) = (z.at(k, j - 1), z.at(k, j));
            let (w0, w1) = (w.at(k, j - 1), w.at(k, j));
            // On a cell both integrands are linear in x times a constant slope.
            lhs += (z1 - z0) * 0.5 * (w0 + w1) + (w1 - w0) * 0.5 * (z0 + z1);
        }
    }
    let mut rhs = 0.0;
    for v in 0..graph.vertex_count() {
        let flux: f64 = graph
            .incident(v)
            .iter()
            .map(|&(e, _)| upwind_value(graph, z, e, v))
            .sum::<Result<f64, _>>()?;
        rhs += flux * w.vertex_value(v);
    }
    Ok((lhs - rhs).abs())
}

/// Largest violation of `u ≪ v` over the k-grid:
/// `max_k max(∫(u−k)⁺ − ∫(v−k)⁺, ∫(u+k)⁻ − ∫(v+k)⁻)`.
pub fn ll_worst_gap<F: Nodal + ?Sized, G: Nodal + ?Sized>(
    graph: &MetricGraph,
    u: &F,
    v: &G,
    k_grid: &[f64],
) -> Result<f64, GridError> {
    if k_grid.is_empty() {
        return Err(GridError::EmptyKGrid);
    }
    check_shape(graph, u)?;
    check_shape(graph, v)?;
    let mut worst = f64::NEG_INFINITY;
    for &k in k_grid {
        let up = integrate_map(graph, u, |_, x| (x - k).max(0.0))?
            - integrate_map(graph, v, |_, x| (x - k).max(0.0))?;
        let down = integrate_map(graph, u, |_, x| (-(x + k)).max(0.0))?
            - integrate_map(graph, v, |_, x| (-(x + k)).max(0.0))?;
        worst = worst.max(up).max(down);
    }
    Ok(worst)
}

/// `u ≪ v` tested on the finite `k_grid`.
pub fn ll_compare<F: Nodal + ?Sized, G: Nodal + ?Sized>(
    graph: &MetricGraph,
    u: &F,
    v: &G,
    k_grid: &[f64],
) -> Result<bool, GridError> {
    Ok(ll_worst_gap(graph, u, v, k_grid)? <= 0.0)
}

/// k-grid covering `(0, max|values|]`: all distinct nodal magnitudes plus
/// midpoints between them.
pub fn refined_k_grid<F: Nodal + ?Sized>(fs: &[&F]) -> Vec<f64> {
    let mut ks: Vec<f64> = fs
        .iter()
        .flat_map(|f| {
            (0..f.edge_count())
                .flat_map(move |e| (0..f.nodes(e)).map(move |j| f.at(e, j).abs()))
        })
        .filter(|&k| k > 0.0)
        .collect();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks.dedup();
    let mut out = Vec::with_capacity(2 * ks.len());
    let mut prev = 0.0;
    for &k in &ks {
        out.push(0.5 * (prev + k));
        out.push(k);
        prev = k;
    }
    out
}

/// L¹ bracket `[x, y] = ∫ sign₀(x) y + ∫_{x=0} |y|`, the zero set being
/// `|x| ≤ 1e-12·∥x∥_∞`.
pub fn bracket_l1<F: Nodal + ?Sized, G: Nodal + ?Sized>(
    graph: &MetricGraph,
    x: &F,
    y: &G,
) -> Result<f64, GridError> {
    check_shape(graph, x)?;
    check_shape(graph, y)?;
    let sup = (0..x.edge_count())
        .flat_map(|e| (0..x.nodes(e)).map(move |j| (e, j)))
        .fold(0.0f64, |m, (e, j)| m.max(x.at(e, j).abs()));
    let zero_tol = 1e-12 * sup;
    let mut total = 0.0;
    for (k, e) in graph.edges().iter().enumerate() {
        let h = e.h();
        for j in 0..=e.cells {
            let xv = x.at(k, j);
            let yv = y.at(k, j);
            let integrand = if xv.abs() <= zero_tol {
                yv.abs()
            } else {
                xv.signum() * yv
            };
            total += node_weight(h, e.cells, j) * integrand;
        }
    }
    Ok(total)
}

/// Vertex part of the bracket in `L¹(V(G))`: `Σ_v sign₀(x_v) y_v + Σ_{x_v=0} |y_v|`.
pub fn bracket_vertex(x: &[f64], y: &[f64]) -> f64 {
    let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-12 * sup;
    x.iter()
        .zip(y)
        .map(|(&a, &b)| if a.abs() <= zero_tol { b.abs() } else { a.signum() * b })
        .sum()
}
