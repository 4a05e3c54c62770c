//! Compact metric graphs: vertices, oriented edges with lengths, exponents
//! and nonlinearities.
//!
//! A [`MetricGraph`] is validated once in [`MetricGraph::build`] and is
//! immutable afterwards; [`MetricGraph::reparametrize_edge`] and
//! [`MetricGraph::split_edge`] return new graphs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalScope, ExprError, Expression};
use crate::nonlinearity::Nonlinearity;

pub const DEFAULT_CELLS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub String);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId(s.to_string())
    }
}

impl From<&str> for EdgeId {
    fn from(s: &str) -> Self {
        EdgeId(s.to_string())
    }
}

/// Whether an edge starts or ends at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initial,
    Terminal,
}

/// Source `f(t, x)` on an edge, stored as an expression composed with an
/// affine change of the arclength variable: `f(t, x) = expr(t, offset + scale·x)`.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    expr: Arc<Expression>,
    scale: f64,
    offset: f64,
}

impl SourceTerm {
    pub fn new(expr: Expression) -> Self {
        Self {
            expr: Arc::new(expr),
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::new(Expression::constant(0.0))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expression::constant(c))
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    /// `(scale, offset)` of the arclength map.
    pub fn affine(&self) -> (f64, f64) {
        (self.scale, self.offset)
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64, ExprError> {
        self.expr
            .evaluate(EvalScope::new(self.offset + self.scale * x, t))
    }

    /// `x ↦ ℓ − x`.
    fn reflected(&self, length: f64) -> Self {
        Self {
            expr: self.expr.clone(),
            scale: -self.scale,
            offset: self.offset + self.scale * length,
        }
    }

    /// `x ↦ x + shift`.
    fn shifted(&self, shift: f64) -> Self {
        Self {
            expr: self.expr.clone(),
            scale: self.scale,
            offset: self.offset + self.scale * shift,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: EdgeId,
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
    pub p: f64,
    pub gamma: Nonlinearity,
    pub source: SourceTerm,
    pub cells: usize,
}

impl Edge {
    /// Edge with identity `γ`, zero source and the default resolution.
    pub fn new(id: &str, from: &str, to: &str, length: f64, p: f64) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
            p,
            gamma: Nonlinearity::Identity,
            source: SourceTerm::zero(),
            cells: DEFAULT_CELLS,
        }
    }

    pub fn with_gamma(mut self, gamma: Nonlinearity) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_source(mut self, source: SourceTerm) -> Self {
        self.source = source;
        self
    }

    pub fn with_cells(mut self, cells: usize) -> Self {
        self.cells = cells;
        self
    }

    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }
}

/// Unvalidated graph description.
#[derive(Debug, Clone, Default)]
pub struct GraphSpec {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<Edge>,
}

impl GraphSpec {
    pub fn new(vertices: &[&str], edges: Vec<Edge>) -> Self {
        Self {
            vertices: vertices.iter().map(|&v| v.into()).collect(),
            edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("edge {0} is a loop")]
    LoopEdge(EdgeId),
    #[error("edges {0} and {1} join the same pair of vertices")]
    DuplicateEdge(EdgeId, EdgeId),
    #[error("graph is not connected")]
    Disconnected,
    #[error("edge {0} has non-positive or non-finite length {1}")]
    NonPositiveLength(EdgeId, f64),
    #[error("edge {0} has exponent p = {1}, must be in (1, ∞)")]
    ExponentOutOfRange(EdgeId, f64),
    #[error("edge {0} refers to unknown vertex {1}")]
    DanglingReference(EdgeId, VertexId),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("edge {0} needs at least one cell")]
    NoCells(EdgeId),
    #[error("graph has no edges")]
    Empty,
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("split fraction {0} does not fall strictly inside the edge grid")]
    FractionOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexTopology {
    pub degree: usize,
    pub is_boundary: bool,
    pub incident: Vec<(EdgeId, Role)>,
}

/// A validated, connected metric graph without loops or multiple edges.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
    endpoints: Vec<(usize, usize)>,
    incidence: Vec<Vec<(usize, Role)>>,
    vertex_index: HashMap<VertexId, usize>,
    edge_index: HashMap<EdgeId, usize>,
}

impl MetricGraph {
    pub fn build(spec: GraphSpec) -> Result<Self, GraphError> {
        let GraphSpec { vertices, edges } = spec;
        if edges.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut vertex_index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if vertex_index.insert(v.clone(), i).is_some() || v.0.is_empty() {
                return Err(GraphError::DuplicateId(v.0.clone()));
            }
        }
        let mut edge_index = HashMap::new();
        let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (k, e) in edges.iter().enumerate() {
            if edge_index.insert(e.id.clone(), k).is_some() || e.id.0.is_empty() {
                return Err(GraphError::DuplicateId(e.id.0.clone()));
            }
            let from = *vertex_index
                .get(&e.from)
                .ok_or_else(|| GraphError::DanglingReference(e.id.clone(), e.from.clone()))?;
            let to = *vertex_index
                .get(&e.to)
                .ok_or_else(|| GraphError::DanglingReference(e.id.clone(), e.to.clone()))?;
            if from == to {
                return Err(GraphError::LoopEdge(e.id.clone()));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(GraphError::NonPositiveLength(e.id.clone(), e.length));
            }
            if !(e.p.is_finite() && e.p > 1.0) {
                return Err(GraphError::ExponentOutOfRange(e.id.clone(), e.p));
            }
            if e.cells == 0 {
                return Err(GraphError::NoCells(e.id.clone()));
            }
            let key = (from.min(to), from.max(to));
            if let Some(&other) = pairs.get(&key) {
                return Err(GraphError::DuplicateEdge(edges[other].id.clone(), e.id.clone()));
            }
            pairs.insert(key, k);
            endpoints.push((from, to));
            incidence[from].push((k, Role::Initial));
            incidence[to].push((k, Role::Terminal));
        }
        let graph = MetricGraph {
            vertices,
            edges,
            endpoints,
            incidence,
            vertex_index,
            edge_index,
        };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(e, _) in &self.incidence[v] {
                let (a, b) = self.endpoints[e];
                let w = if a == v { b } else { a };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn vertex_id(&self, v: usize) -> &VertexId {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, id: &VertexId) -> Result<usize, GraphError> {
        self.vertex_index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(id.clone()))
    }

    pub fn edge_index(&self, id: &EdgeId) -> Result<usize, GraphError> {
        self.edge_index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownEdge(id.clone()))
    }

    /// `(initial, terminal)` vertex indices of edge `e`.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.endpoints[e]
    }

    /// Incident edges of vertex `v` with the role `v` plays on each.
    pub fn incident(&self, v: usize) -> &[(usize, Role)] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.degree(v) == 1
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.is_boundary(v)).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn vertex_topology(&self, v: &VertexId) -> Result<VertexTopology, GraphError> {
        let i = self.vertex_index(v)?;
        Ok(VertexTopology {
            degree: self.degree(i),
            is_boundary: self.is_boundary(i),
            incident: self.incidence[i]
                .iter()
                .map(|&(e, role)| (self.edges[e].id.clone(), role))
                .collect(),
        })
    }

    /// Editable copy of the description this graph was built from.
    pub fn spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
        }
    }

    /// Reverses the orientation of edge `e`, transforming its source by
    /// `x ↦ ℓ − x`. Applying it twice gives back the original graph.
    pub fn reparametrize_edge(&self, e: &EdgeId) -> Result<MetricGraph, GraphError> {
        let k = self.edge_index(e)?;
        let mut spec = self.spec();
        let edge = &mut spec.edges[k];
        std::mem::swap(&mut edge.from, &mut edge.to);
        edge.source = edge.source.reflected(edge.length);
        MetricGraph::build(spec)
    }

    /// Replaces edge `e` with two edges joined at a fresh degree-two vertex.
    ///
    /// The split point is snapped to the nearest grid node so that the nodes
    /// of the new graph contain the nodes of the old one. Returns the new
    /// graph, the new vertex and the fraction actually used.
    pub fn split_edge(
        &self,
        e: &EdgeId,
        at: f64,
    ) -> Result<(MetricGraph, VertexId, f64), GraphError> {
        let k = self.edge_index(e)?;
        if !(at > 0.0 && at < 1.0) {
            return Err(GraphError::FractionOutOfRange(at));
        }
        let old = &self.edges[k];
        let node = (at * old.cells as f64).round() as usize;
        if node == 0 || node >= old.cells {
            return Err(GraphError::FractionOutOfRange(at));
        }
        let frac = node as f64 / old.cells as f64;
        let mid = self.fresh_vertex_id(&format!("{}~mid", old.id));
        let first_len = old.length * frac;
        let first = Edge {
            id: self.fresh_edge_id(&format!("{}~1", old.id)),
            to: mid.clone(),
            length: first_len,
            cells: node,
            ..old.clone()
        };
        let second = Edge {
            id: self.fresh_edge_id(&format!("{}~2", old.id)),
            from: mid.clone(),
            length: old.length - first_len,
            cells: old.cells - node,
            source: old.source.shifted(first_len),
            ..old.clone()
        };
        let mut spec = self.spec();
        spec.vertices.push(mid.clone());
        spec.edges.splice(k..=k, [first, second]);
        Ok((MetricGraph::build(spec)?, mid, frac))
    }

    pub(crate) fn fresh_vertex_id(&self, base: &str) -> VertexId {
        let mut candidate = base.to_string();
        let mut n = 1;
        while self.vertex_index.contains_key(&VertexId(candidate.clone())) {
            candidate = format!("{base}{n}");
            n += 1;
        }
        VertexId(candidate)
    }

    pub(crate) fn fresh_edge_id(&self, base: &str) -> EdgeId {
        let mut candidate = base.to_string();
        let mut n = 1;
        while self.edge_index.contains_key(&EdgeId(candidate.clone())) {
            candidate = format!("{base}{n}");
            n += 1;
        }
        EdgeId(candidate)
    }

    /// Edges that lie on at least one cycle (i.e. are not bridges).
    pub fn cycle_edges(&self) -> Vec<usize> {
        (0..self.edge_count())
            .filter(|&e| {
                let (a, b) = self.endpoints[e];
                self.reachable_without(a, b, e)
            })
            .collect()
    }

    fn reachable_without(&self, from: usize, to: usize, skip: usize) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for &(e, _) in &self.incidence[v] {
                if e == skip {
                    continue;
                }
                let (a, b) = self.endpoints[e];
                let w = if a == v { b } else { a };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    /// Stable textual fingerprint of topology, geometry and coefficients.
    pub fn canonical_description(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {}\n", v));
        }
        for e in &self.edges {
            let gamma = match &e.gamma {
                Nonlinearity::Identity => "identity".to_string(),
                Nonlinearity::Power { m } => format!("power {m:?}"),
                Nonlinearity::Table(t) => {
                    let pts: Vec<String> =
                        t.points().map(|(r, s)| format!("{r:?}:{s:?}")).collect();
                    format!("table {}", pts.join(","))
                }
            };
            let (scale, offset) = e.source.affine();
            out.push_str(&format!(
                "e {} {} {} {:?} {:?} {} [{}] {} {:?} {:?}\n",
                e.id,
                e.from,
                e.to,
                e.length,
                e.p,
                e.cells,
                gamma,
                e.source.expression(),
                scale,
                offset
            ));
        }
        out
    }

    /// Degree of every vertex keyed by id; handy for reports.
    pub fn degrees(&self) -> BTreeMap<VertexId, usize> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), self.degree(i)))
            .collect()
    }

    /// Number of connected components computed by union–find over the edge
    /// endpoint pairs. Always 1 for a built graph; exposed for checking.
    pub fn union_find_components(&self) -> usize {
        let n = self.vertex_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.endpoints {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let roots: HashSet<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
        roots.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn path3() -> MetricGraph {
        MetricGraph::build(GraphSpec::new(
            &["v1", "v2", "v3"],
            vec![
                Edge::new("e1", "v1", "v2", 1.0, 2.0),
                Edge::new("e2", "v2", "v3", 1.0, 2.0),
            ],
        ))
        .unwrap()
    }

    fn star3() -> MetricGraph {
        MetricGraph::build(GraphSpec::new(
            &["c", "a", "b", "d"],
            vec![
                Edge::new("e1", "c", "a", 1.0, 2.0),
                Edge::new("e2", "c", "b", 1.0, 2.0),
                Edge::new("e3", "d", "c", 1.0, 2.0),
            ],
        ))
        .unwrap()
    }

    fn triangle() -> MetricGraph {
        MetricGraph::build(GraphSpec::new(
            &["v1", "v2", "v3"],
            vec![
                Edge::new("e1", "v1", "v2", 1.0, 2.0),
                Edge::new("e2", "v2", "v3", 1.0, 2.0),
                Edge::new("e3", "v3", "v1", 1.0, 2.0),
            ],
        ))
        .unwrap()
    }

    #[test]
    fn path_topology() {
        let g = path3();
        let b: Vec<_> = g.boundary_vertices().iter().map(|&v| g.vertex_id(v).clone()).collect();
        assert_eq!(b, vec![VertexId::from("v1"), VertexId::from("v3")]);
        let t = g.vertex_topology(&"v2".into()).unwrap();
        assert_eq!(t.degree, 2);
        assert!(!t.is_boundary);
        assert_eq!(
            t.incident,
            vec![("e1".into(), Role::Terminal), ("e2".into(), Role::Initial)]
        );
        assert!(matches!(
            g.vertex_topology(&"zz".into()),
            Err(GraphError::UnknownVertex(_))
        ));
    }

    #[test]
    fn star_and_triangle_topology() {
        let s = star3();
        assert_eq!(s.vertex_topology(&"c".into()).unwrap().degree, 3);
        let t = triangle();
        assert!(t.boundary_vertices().is_empty());
        assert!((0..3).all(|v| t.degree(v) == 2));
        assert_eq!(t.cycle_edges(), vec![0, 1, 2]);
        assert!(s.cycle_edges().is_empty());
    }

    #[test]
    fn validation_errors() {
        let loop_spec = GraphSpec::new(&["v1"], vec![Edge::new("e", "v1", "v1", 1.0, 2.0)]);
        assert!(matches!(MetricGraph::build(loop_spec), Err(GraphError::LoopEdge(_))));
        let dup = GraphSpec::new(
            &["v1", "v2"],
            vec![
                Edge::new("e1", "v1", "v2", 1.0, 2.0),
                Edge::new("e2", "v2", "v1", 2.0, 2.0),
            ],
        );
        assert!(matches!(MetricGraph::build(dup), Err(GraphError::DuplicateEdge(..))));
        let disc = GraphSpec::new(
            &["a", "b", "c", "d"],
            vec![Edge::new("e1", "a", "b", 1.0, 2.0), Edge::new("e2", "c", "d", 1.0, 2.0)],
        );
        assert!(matches!(MetricGraph::build(disc), Err(GraphError::Disconnected)));
        let neg = GraphSpec::new(&["a", "b"], vec![Edge::new("e", "a", "b", 0.0, 2.0)]);
        assert!(matches!(MetricGraph::build(neg), Err(GraphError::NonPositiveLength(..))));
        let p1 = GraphSpec::new(&["a", "b"], vec![Edge::new("e", "a", "b", 1.0, 1.0)]);
        assert!(matches!(MetricGraph::build(p1), Err(GraphError::ExponentOutOfRange(..))));
        let dangling = GraphSpec::new(&["a"], vec![Edge::new("e", "a", "b", 1.0, 2.0)]);
        assert!(matches!(
            MetricGraph::build(dangling),
            Err(GraphError::DanglingReference(..))
        ));
        let isolated = GraphSpec::new(&["a", "b", "c"], vec![Edge::new("e", "a", "b", 1.0, 2.0)]);
        assert!(matches!(MetricGraph::build(isolated), Err(GraphError::Disconnected)));
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        for g in [path3(), star3(), triangle()] {
            let total: usize = (0..g.vertex_count()).map(|v| g.degree(v)).sum();
            assert_eq!(total, 2 * g.edge_count());
            assert_eq!(g.union_find_components(), 1);
        }
    }

    fn graph_with_source(src: &str, length: f64) -> MetricGraph {
        let f = SourceTerm::new(parse_expression(src).unwrap());
        MetricGraph::build(GraphSpec::new(
            &["v1", "v2"],
            vec![Edge::new("e", "v1", "v2", length, 2.0).with_source(f)],
        ))
        .unwrap()
    }

    #[test]
    fn reparametrization_reflects_source() {
        let g = graph_with_source("x", 2.0);
        let r = g.reparametrize_edge(&"e".into()).unwrap();
        let e = r.edge(0);
        assert_eq!((e.from.0.as_str(), e.to.0.as_str()), ("v2", "v1"));
        for &x in &[0.0, 0.5, 1.3, 2.0] {
            assert!((e.source.eval(0.0, x).unwrap() - (2.0 - x)).abs() < 1e-15);
        }
        // Involution: sources agree on nodes.
        let back = r.reparametrize_edge(&"e".into()).unwrap();
        assert_eq!(back.canonical_description(), g.canonical_description());
        let c = graph_with_source("3.5", 2.0).reparametrize_edge(&"e".into()).unwrap();
        assert_eq!(c.edge(0).source.eval(0.0, 0.7).unwrap(), 3.5);
        assert!(matches!(
            g.reparametrize_edge(&"nope".into()),
            Err(GraphError::UnknownEdge(_))
        ));
    }

    #[test]
    fn split_edge_halves() {
        let g = graph_with_source("x", 1.0);
        let (s, mid, frac) = g.split_edge(&"e".into(), 0.5).unwrap();
        assert_eq!(frac, 0.5);
        assert_eq!(s.edge_count(), 2);
        assert_eq!(s.vertex_topology(&mid).unwrap().degree, 2);
        assert_eq!(s.edge(0).length, 0.5);
        assert_eq!(s.edge(1).length, 0.5);
        assert_eq!(s.edge(0).cells + s.edge(1).cells, g.edge(0).cells);
        for &x in &[0.0, 0.2, 0.5] {
            assert_eq!(s.edge(0).source.eval(0.0, x).unwrap(), x);
            assert!((s.edge(1).source.eval(0.0, x).unwrap() - (x + 0.5)).abs() < 1e-15);
        }
        assert!(matches!(
            g.split_edge(&"e".into(), 1.0),
            Err(GraphError::FractionOutOfRange(_))
        ));
        assert!(matches!(
            g.split_edge(&"e".into(), 1e-4),
            Err(GraphError::FractionOutOfRange(_))
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_preserves_total_length(
                lengths in proptest::collection::vec(0.1f64..10.0, 1..5),
                at in 0.05f64..0.95,
                pick in 0usize..5,
            ) {
                let n = lengths.len();
                let vs: Vec<String> = (0..=n).map(|i| format!("v{i}")).collect();
                let edges = lengths
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| Edge::new(&format!("e{i}"), &vs[i], &vs[i + 1], l, 2.0))
                    .collect();
                let refs: Vec<&str> = vs.iter().map(String::as_str).collect();
                let g = MetricGraph::build(GraphSpec::new(&refs, edges)).unwrap();
                let id = g.edge(pick % n).id.clone();
                let (s, _, _) = g.split_edge(&id, at).unwrap();
                let before = g.total_length();
                let after = s.total_length();
                prop_assert!((before - after).abs() <= 4.0 * f64::EPSILON * before);
                let degrees: usize = (0..s.vertex_count()).map(|v| s.degree(v)).sum();
                prop_assert_eq!(degrees, 2 * s.edge_count());
            }

            #[test]
            fn connectivity_agrees_with_union_find(
                pairs in proptest::collection::vec((0usize..6, 0usize..6), 1..9)
            ) {
                let mut seen = HashSet::new();
                let mut edges = Vec::new();
                for (i, (a, b)) in pairs.into_iter().enumerate() {
                    if a == b || !seen.insert((a.min(b), a.max(b))) {
                        continue;
                    }
                    edges.push(Edge::new(&format!("e{i}"), &format!("v{a}"), &format!("v{b}"), 1.0, 2.0));
                }
                prop_assume!(!edges.is_empty());
                let mut used: Vec<String> = edges
                    .iter()
                    .flat_map(|e| [e.from.0.clone(), e.to.0.clone()])
                    .collect();
                used.sort();
                used.dedup();
                let spec = GraphSpec {
                    vertices: used.iter().map(|s| VertexId(s.clone())).collect(),
                    edges: edges.clone(),
                };
                // Union-find oracle computed independently of the graph type.
                let index: HashMap<&String, usize> = used.iter().enumerate().map(|(i, s)| (s, i)).collect();
                let mut parent: Vec<usize> = (0..used.len()).collect();
                fn root(p: &mut Vec<usize>, x: usize) -> usize {
                    if p[x] == x { x } else { let r = root(p, p[x]); p[x] = r; r }
                }
                for e in &edges {
                    let (a, b) = (index[&e.from.0], index[&e.to.0]);
                    let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                    parent[ra] = rb;
                }
                let comps: HashSet<usize> = (0..used.len()).map(|v| root(&mut parent, v)).collect();
                match MetricGraph::build(spec) {
                    Ok(_) => prop_assert_eq!(comps.len(), 1),
                    Err(GraphError::Disconnected) => prop_assert!(comps.len() > 1),
                    Err(other) => prop_assert!(false, "unexpected {:?}", other),
                }
            }
        }
    }
}
