//! Scenario documents: JSON schema, validation with JSON-pointer
//! diagnostics, and conversion to solver inputs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::expr::{parse_expression, EvalScope, ExprError, Expression};
use crate::graph_elliptic::{sample_sources, EllipticProblem, Method};
use crate::grid_functions::EdgeFunction;
use crate::metric_graph::{Edge, GraphSpec, MetricGraph, SourceTerm, DEFAULT_CELLS};
use crate::newton::SolverConfig;
use crate::nonlinearity::Nonlinearity;
use crate::parabolic::{Schedule, TimeGrid, VertexFlux};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: {source}")]
    Expr {
        pointer: String,
        #[source]
        source: ExprError,
    },
}

impl ScenarioError {
    /// JSON pointer of the offending value, when the error has one.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ScenarioError::Schema { pointer, .. } | ScenarioError::Expr { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Escapes a key as a JSON-pointer reference token.
fn token(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// A number, or an expression in `x` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaDoc {
    Identity,
    Power(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub p: f64,
    pub gamma: GammaDoc,
    pub cells: Option<usize>,
    pub source: Option<Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDoc {
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverDoc {
    pub tol: Option<f64>,
    pub match_tol: Option<f64>,
    pub method: Option<Method>,
    pub cells_default: Option<usize>,
}

/// Validated scenario document. Maps keep the order of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDoc {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    pub flux: Vec<(String, Scalar)>,
    pub initial: Vec<(String, Scalar)>,
    pub time: Option<TimeDoc>,
    pub solver: SolverDoc,
}

/// Everything a run needs, built from a [`ScenarioDoc`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub graph: MetricGraph,
    pub schedule: Schedule,
    pub initial: EdgeFunction,
    pub time: Option<TimeGrid>,
    pub cfg: SolverConfig,
    pub method: Method,
}

fn object<'a>(v: &'a Value, ptr: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>, ScenarioError> {
    let map = v.as_object().ok_or_else(|| schema(ptr, "expected an object"))?;
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(schema(format!("{ptr}/{}", token(k)), "unknown key"));
    }
    Ok(map)
}

fn required<'a>(map: &'a Map<String, Value>, ptr: &str, key: &str) -> Result<&'a Value, ScenarioError> {
    map.get(key).ok_or_else(|| schema(format!("{ptr}/{key}"), "missing required key"))
}

fn number(v: &Value, ptr: &str) -> Result<f64, ScenarioError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema(ptr, "expected a finite number"))
}

fn positive(v: &Value, ptr: &str) -> Result<f64, ScenarioError> {
    let x = number(v, ptr)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(schema(ptr, format!("must be positive, got {x}")))
    }
}

fn string(v: &Value, ptr: &str) -> Result<String, ScenarioError> {
    v.as_str().map(str::to_owned).ok_or_else(|| schema(ptr, "expected a string"))
}

fn cells(v: &Value, ptr: &str) -> Result<usize, ScenarioError> {
    match v.as_u64() {
        Some(n) if n >= 2 => Ok(n as usize),
        _ => Err(schema(ptr, "expected an integer of at least 2")),
    }
}

fn parse_expr(src: &str, ptr: &str) -> Result<Expression, ScenarioError> {
    parse_expression(src).map_err(|source| ScenarioError::Expr {
        pointer: ptr.to_string(),
        source,
    })
}

fn scalar(v: &Value, ptr: &str) -> Result<Scalar, ScenarioError> {
    if v.is_number() {
        return number(v, ptr).map(Scalar::Number);
    }
    let map = object(v, ptr, &["expr"]).map_err(|_| schema(ptr, "expected a number or {\"expr\": ...}"))?;
    let src = string(required(map, ptr, "expr")?, &format!("{ptr}/expr"))?;
    parse_expr(&src, &format!("{ptr}/expr"))?;
    Ok(Scalar::Expr(src))
}

fn gamma(v: &Value, ptr: &str) -> Result<GammaDoc, ScenarioError> {
    let map = object(v, ptr, &["kind", "m", "points"])?;
    let kind_ptr = format!("{ptr}/kind");
    let kind = string(required(map, ptr, "kind")?, &kind_ptr)?;
    let only = |keys: &[&str]| -> Result<(), ScenarioError> {
        match map.keys().find(|k| *k != "kind" && !keys.contains(&k.as_str())) {
            Some(k) => Err(schema(format!("{ptr}/{}", token(k)), format!("not allowed for kind {kind}"))),
            None => Ok(()),
        }
    };
    match kind.as_str() {
        "identity" => {
            only(&[])?;
            Ok(GammaDoc::Identity)
        }
        "power" => {
            only(&["m"])?;
            let mp = format!("{ptr}/m");
            let m = number(required(map, ptr, "m")?, &mp)?;
            Nonlinearity::power(m).map_err(|e| schema(&mp, e.to_string()))?;
            Ok(GammaDoc::Power(m))
        }
        "table" => {
            only(&["points"])?;
            let pp = format!("{ptr}/points");
            let arr = required(map, ptr, "points")?
                .as_array()
                .ok_or_else(|| schema(&pp, "expected an array of [r, s] pairs"))?;
            let pts = arr
                .iter()
                .enumerate()
                .map(|(i, pt)| {
                    let ip = format!("{pp}/{i}");
                    match pt.as_array().map(Vec::as_slice) {
                        Some([r, s]) => Ok((number(r, &format!("{ip}/0"))?, number(s, &format!("{ip}/1"))?)),
                        _ => Err(schema(&ip, "expected a pair [r, s]")),
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Nonlinearity::table(&pts).map_err(|e| schema(&pp, e.to_string()))?;
            Ok(GammaDoc::Table(pts))
        }
        other => Err(schema(kind_ptr, format!("unknown kind {other:?}, expected identity, power or table"))),
    }
}

fn keyed_scalars(v: Option<&Value>, ptr: &str, known: &[String], what: &str) -> Result<Vec<(String, Scalar)>, ScenarioError> {
    let Some(v) = v else { return Ok(Vec::new()) };
    let map = v.as_object().ok_or_else(|| schema(ptr, "expected an object"))?;
    map.iter()
        .map(|(k, val)| {
            let kp = format!("{ptr}/{}", token(k));
            if !known.contains(k) {
                return Err(schema(&kp, format!("unknown {what} {k:?}")));
            }
            Ok((k.clone(), scalar(val, &kp)?))
        })
        .collect()
}

impl ScenarioDoc {
    pub fn from_value(v: &Value) -> Result<Self, ScenarioError> {
        let root = object(v, "", &["vertices", "edges", "flux", "initial", "time", "solver"])?;
        let verts = required(root, "", "vertices")?
            .as_array()
            .ok_or_else(|| schema("/vertices", "expected an array"))?;
        let mut vertices = Vec::new();
        for (i, vv) in verts.iter().enumerate() {
            let ptr = format!("/vertices/{i}");
            let id = string(required(object(vv, &ptr, &["id"])?, &ptr, "id")?, &format!("{ptr}/id"))?;
            if vertices.contains(&id) {
                return Err(schema(format!("{ptr}/id"), format!("duplicate vertex id {id:?}")));
            }
            vertices.push(id);
        }
        let edge_values = required(root, "", "edges")?
            .as_array()
            .ok_or_else(|| schema("/edges", "expected an array"))?;
        if edge_values.is_empty() {
            return Err(schema("/edges", "at least one edge is required"));
        }
        let mut edges: Vec<EdgeDoc> = Vec::new();
        for (i, ev) in edge_values.iter().enumerate() {
            let ptr = format!("/edges/{i}");
            let m = object(ev, &ptr, &["id", "from", "to", "length", "p", "gamma", "cells", "source"])?;
            let id = string(required(m, &ptr, "id")?, &format!("{ptr}/id"))?;
            if edges.iter().any(|e| e.id == id) {
                return Err(schema(format!("{ptr}/id"), format!("duplicate edge id {id:?}")));
            }
            let end = |key: &str| -> Result<String, ScenarioError> {
                let kp = format!("{ptr}/{key}");
                let v = string(required(m, &ptr, key)?, &kp)?;
                if vertices.contains(&v) {
                    Ok(v)
                } else {
                    Err(schema(kp, format!("unknown vertex {v:?}")))
                }
            };
            let (from, to) = (end("from")?, end("to")?);
            if from == to {
                return Err(schema(format!("{ptr}/to"), "loops are not allowed"));
            }
            let length = positive(required(m, &ptr, "length")?, &format!("{ptr}/length"))?;
            let pp = format!("{ptr}/p");
            let p = number(required(m, &ptr, "p")?, &pp)?;
            if p <= 1.0 {
                return Err(schema(pp, format!("must exceed 1, got {p}")));
            }
            let gamma = match m.get("gamma") {
                Some(g) => gamma(g, &format!("{ptr}/gamma"))?,
                None => GammaDoc::Identity,
            };
            let cells = m.get("cells").map(|c| cells(c, &format!("{ptr}/cells"))).transpose()?;
            let source = m.get("source").map(|s| scalar(s, &format!("{ptr}/source"))).transpose()?;
            edges.push(EdgeDoc {
                id,
                from,
                to,
                length,
                p,
                gamma,
                cells,
                source,
            });
        }
        let edge_ids: Vec<String> = edges.iter().map(|e| e.id.clone()).collect();
        let flux = keyed_scalars(root.get("flux"), "/flux", &vertices, "vertex")?;
        let initial = keyed_scalars(root.get("initial"), "/initial", &edge_ids, "edge")?;
        let time = root
            .get("time")
            .map(|t| -> Result<TimeDoc, ScenarioError> {
                let m = object(t, "/time", &["t_end", "dt"])?;
                Ok(TimeDoc {
                    t_end: positive(required(m, "/time", "t_end")?, "/time/t_end")?,
                    dt: positive(required(m, "/time", "dt")?, "/time/dt")?,
                })
            })
            .transpose()?;
        let solver = match root.get("solver") {
            None => SolverDoc::default(),
            Some(s) => {
                let m = object(s, "/solver", &["tol", "match_tol", "method", "cells_default"])?;
                let method = m
                    .get("method")
                    .map(|v| match v.as_str() {
                        Some("newton") => Ok(Method::Monolithic),
                        Some("gluing") => Ok(Method::Gluing),
                        _ => Err(schema("/solver/method", "expected \"newton\" or \"gluing\"")),
                    })
                    .transpose()?;
                SolverDoc {
                    tol: m.get("tol").map(|v| positive(v, "/solver/tol")).transpose()?,
                    match_tol: m.get("match_tol").map(|v| positive(v, "/solver/match_tol")).transpose()?,
                    method,
                    cells_default: m.get("cells_default").map(|v| cells(v, "/solver/cells_default")).transpose()?,
                }
            }
        };
        Ok(Self {
            vertices,
            edges,
            flux,
            initial,
            time,
            solver,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(&v)
    }

    pub fn to_value(&self) -> Value {
        fn scalar(s: &Scalar) -> Value {
            match s {
                Scalar::Number(x) => Value::from(*x),
                Scalar::Expr(src) => serde_json::json!({ "expr": src }),
            }
        }
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                let mut m = Map::new();
                m.insert("id".into(), e.id.clone().into());
                m.insert("from".into(), e.from.clone().into());
                m.insert("to".into(), e.to.clone().into());
                m.insert("length".into(), e.length.into());
                m.insert("p".into(), e.p.into());
                m.insert(
                    "gamma".into(),
                    match &e.gamma {
                        GammaDoc::Identity => serde_json::json!({ "kind": "identity" }),
                        GammaDoc::Power(m) => serde_json::json!({ "kind": "power", "m": m }),
                        GammaDoc::Table(pts) => serde_json::json!({
                            "kind": "table",
                            "points": pts.iter().map(|&(r, s)| vec![r, s]).collect::<Vec<_>>(),
                        }),
                    },
                );
                if let Some(c) = e.cells {
                    m.insert("cells".into(), c.into());
                }
                if let Some(s) = &e.source {
                    m.insert("source".into(), scalar(s));
                }
                Value::Object(m)
            })
            .collect();
        let mut root = Map::new();
        root.insert(
            "vertices".into(),
            self.vertices.iter().map(|v| serde_json::json!({ "id": v })).collect(),
        );
        root.insert("edges".into(), edges.into());
        let keyed = |items: &[(String, Scalar)]| -> Value {
            Value::Object(items.iter().map(|(k, s)| (k.clone(), scalar(s))).collect())
        };
        if !self.flux.is_empty() {
            root.insert("flux".into(), keyed(&self.flux));
        }
        if !self.initial.is_empty() {
            root.insert("initial".into(), keyed(&self.initial));
        }
        if let Some(t) = self.time {
            root.insert("time".into(), serde_json::json!({ "t_end": t.t_end, "dt": t.dt }));
        }
        let s = &self.solver;
        let mut sm = Map::new();
        if let Some(x) = s.tol {
            sm.insert("tol".into(), x.into());
        }
        if let Some(x) = s.match_tol {
            sm.insert("match_tol".into(), x.into());
        }
        if let Some(m) = s.method {
            sm.insert(
                "method".into(),
                match m {
                    Method::Monolithic => "newton",
                    Method::Gluing => "gluing",
                }
                .into(),
            );
        }
        if let Some(c) = s.cells_default {
            sm.insert("cells_default".into(), c.into());
        }
        if !sm.is_empty() {
            root.insert("solver".into(), Value::Object(sm));
        }
        Value::Object(root)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("documents serialize")
    }

    /// Builds solver inputs; graph-level failures (disconnected graph,
    /// parallel edges) are reported against `/edges`.
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let default_cells = self.solver.cells_default.unwrap_or(DEFAULT_CELLS);
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let gamma = match &e.gamma {
                    GammaDoc::Identity => Nonlinearity::Identity,
                    GammaDoc::Power(m) => Nonlinearity::power(*m).map_err(|err| schema(format!("/edges/{i}/gamma/m"), err.to_string()))?,
                    GammaDoc::Table(pts) => {
                        Nonlinearity::table(pts).map_err(|err| schema(format!("/edges/{i}/gamma/points"), err.to_string()))?
                    }
                };
                let source = match &e.source {
                    None => SourceTerm::zero(),
                    Some(Scalar::Number(c)) => SourceTerm::constant(*c),
                    Some(Scalar::Expr(src)) => SourceTerm::new(parse_expr(src, &format!("/edges/{i}/source/expr"))?),
                };
                Ok(Edge::new(&e.id, &e.from, &e.to, e.length, e.p)
                    .with_gamma(gamma)
                    .with_source(source)
                    .with_cells(e.cells.unwrap_or(default_cells)))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let names: Vec<&str> = self.vertices.iter().map(String::as_str).collect();
        let graph = MetricGraph::build(GraphSpec::new(&names, edges)).map_err(|e| schema("/edges", e.to_string()))?;

        let mut schedule = Schedule::from_graph(&graph);
        for (id, s) in &self.flux {
            let v = self.vertices.iter().position(|x| x == id).expect("validated vertex id");
            let flux = match s {
                Scalar::Number(c) => VertexFlux::Constant(*c),
                Scalar::Expr(src) => VertexFlux::Expr(Arc::new(parse_expr(src, &format!("/flux/{}/expr", token(id)))?)),
            };
            schedule = schedule.with_flux(v, flux);
        }

        let mut initial_exprs: BTreeMap<usize, (String, Expression)> = BTreeMap::new();
        let mut initial_consts: BTreeMap<usize, f64> = BTreeMap::new();
        for (id, s) in &self.initial {
            let k = self.edges.iter().position(|e| &e.id == id).expect("validated edge id");
            match s {
                Scalar::Number(c) => {
                    initial_consts.insert(k, *c);
                }
                Scalar::Expr(src) => {
                    let ptr = format!("/initial/{}/expr", token(id));
                    initial_exprs.insert(k, (ptr.clone(), parse_expr(src, &ptr)?));
                }
            }
        }
        let initial = EdgeFunction::try_from_fn(&graph, |k, x| match initial_exprs.get(&k) {
            Some((ptr, e)) => e.evaluate(EvalScope::new(x, 0.0)).map_err(|source| ScenarioError::Expr {
                pointer: ptr.clone(),
                source,
            }),
            None => Ok(initial_consts.get(&k).copied().unwrap_or(0.0)),
        })?;

        let time = self
            .time
            .map(|t| TimeGrid::uniform(t.t_end, t.dt).map_err(|e| schema("/time", e.to_string())))
            .transpose()?;
        let mut cfg = SolverConfig::default();
        if let Some(tol) = self.solver.tol {
            cfg.tol = tol;
        }
        if let Some(m) = self.solver.match_tol {
            cfg.match_tol = m;
        }
        Ok(Scenario {
            doc: self.clone(),
            graph,
            schedule,
            initial,
            time,
            cfg,
            method: self.solver.method.unwrap_or(Method::Monolithic),
        })
    }
}

/// Reads, validates and builds a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioDoc::from_json(&text)?.build()
}

impl Scenario {
    /// Elliptic problem with the sources and fluxes evaluated at `t = 0`.
    pub fn elliptic_problem(&self) -> Result<EllipticProblem, ScenarioError> {
        let g = sample_sources(&self.graph, 0.0).map_err(|source| ScenarioError::Expr {
            pointer: "/edges".into(),
            source,
        })?;
        let omega = self.schedule.omega_at(0.0).map_err(|source| ScenarioError::Expr {
            pointer: "/flux".into(),
            source,
        })?;
        EllipticProblem::new(self.graph.clone(), g, omega).map_err(|e| schema("", e.to_string()))
    }
}
