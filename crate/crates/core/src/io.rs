//! Output formats: NDJSON trajectory records, checkpoints, CSV tables and
//! SVG line charts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph_elliptic::{edge_nodes, EllipticSolution};
use crate::grid_functions::{EdgeFunction, GraphFunction, Nodal};
use crate::metric_graph::MetricGraph;
use crate::parabolic::{Resume, StepRecord};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint belongs to scenario {found}, current scenario is {expected}")]
    GraphHashMismatch { expected: String, found: String },
    #[error("checkpoint does not fit the graph: {0}")]
    Shape(String),
}

fn io_err(path: &Path, e: impl ToString) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// 17 significant digits, `null` for non-finite values.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// One NDJSON line of a parabolic run.
#[derive(Debug, Clone, PartialEq)]
pub struct WireRecord {
    pub t: f64,
    pub mass: f64,
    pub energy_residual: f64,
    pub vertex_values: Vec<(String, f64)>,
    pub edges: Vec<(String, Vec<f64>)>,
}

impl WireRecord {
    pub fn from_step(graph: &MetricGraph, rec: &StepRecord) -> Self {
        Self {
            t: rec.t,
            mass: rec.mass,
            energy_residual: rec.energy_residual,
            vertex_values: graph
                .vertices()
                .iter()
                .zip(rec.u.vertex_values())
                .map(|(id, &u)| (id.0.clone(), u))
                .collect(),
            edges: graph
                .edges()
                .iter()
                .zip(rec.v.values())
                .map(|(e, v)| (e.id.0.clone(), v.clone()))
                .collect(),
        }
    }

    /// Serialises without a trailing newline.
    pub fn to_line(&self) -> String {
        let key = |k: &str| serde_json::to_string(k).expect("strings serialize");
        let mut s = String::with_capacity(64 + 24 * self.edges.iter().map(|(_, v)| v.len()).sum::<usize>());
        write!(
            s,
            "{{\"t\":{},\"mass\":{},\"energy_residual\":{},\"vertex_values\":{{",
            format_number(self.t),
            format_number(self.mass),
            format_number(self.energy_residual)
        )
        .unwrap();
        for (i, (id, u)) in self.vertex_values.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{}:{}", key(id), format_number(*u)).unwrap();
        }
        s.push_str("},\"edges\":{");
        for (i, (id, vals)) in self.edges.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{}:[", key(id)).unwrap();
            for (j, v) in vals.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&format_number(*v));
            }
            s.push(']');
        }
        s.push_str("}}");
        s
    }

    pub fn parse(line: &str, lineno: usize) -> Result<Self, IoError> {
        let bad = |message: &str| IoError::Parse {
            line: lineno,
            message: message.to_string(),
        };
        let v: Value = serde_json::from_str(line).map_err(|e| IoError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let m = v.as_object().ok_or_else(|| bad("expected an object"))?;
        let num = |v: Option<&Value>| -> Result<f64, IoError> {
            match v {
                Some(Value::Null) => Ok(f64::NAN),
                Some(x) => x.as_f64().ok_or_else(|| bad("expected a number")),
                None => Err(bad("missing field")),
            }
        };
        let vertex_values = m
            .get("vertex_values")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing vertex_values"))?
            .iter()
            .map(|(k, x)| Ok((k.clone(), num(Some(x))?)))
            .collect::<Result<_, IoError>>()?;
        let edges = m
            .get("edges")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing edges"))?
            .iter()
            .map(|(k, x)| {
                let arr = x.as_array().ok_or_else(|| bad("edge values must be an array"))?;
                Ok((k.clone(), arr.iter().map(|y| num(Some(y))).collect::<Result<_, _>>()?))
            })
            .collect::<Result<_, IoError>>()?;
        Ok(Self {
            t: num(m.get("t"))?,
            mass: num(m.get("mass"))?,
            energy_residual: num(m.get("energy_residual"))?,
            vertex_values,
            edges,
        })
    }
}

/// Appends one line per record and flushes after each.
pub struct NdjsonWriter<W: Write> {
    out: W,
}

impl<W: Write> NdjsonWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, rec: &WireRecord) -> std::io::Result<()> {
        self.out.write_all(rec.to_line().as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses every nonempty line of an NDJSON stream.
pub fn read_ndjson(text: &str) -> Result<Vec<WireRecord>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| WireRecord::parse(l, i + 1))
        .collect()
}

/// Fingerprint of everything that determines a trajectory: graph with
/// sources, vertex fluxes and time step.
pub fn scenario_hash(scenario: &Scenario) -> String {
    let mut h = Sha256::new();
    h.update(scenario.graph.canonical_description().as_bytes());
    for (id, flux) in &scenario.doc.flux {
        h.update(format!("flux {id} {flux:?}\n").as_bytes());
    }
    if let Some(t) = scenario.doc.time {
        h.update(format!("dt {:?}\n", t.dt).as_bytes());
    }
    hex::encode(h.finalize())
}

/// Resumable state after a given step.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub graph_hash: String,
    pub step: usize,
    pub t: f64,
    pub seed: Option<u64>,
    pub v: Vec<Vec<f64>>,
    pub u_vertices: Vec<f64>,
    pub u_interior: Vec<Vec<f64>>,
}

const CHECKPOINT_FORMAT: &str = "qgdiff-checkpoint/1";

impl Checkpoint {
    pub fn from_record(scenario: &Scenario, rec: &StepRecord, seed: Option<u64>) -> Self {
        Self {
            graph_hash: scenario_hash(scenario),
            step: rec.index,
            t: rec.t,
            seed,
            v: rec.v.values().to_vec(),
            u_vertices: rec.u.vertex_values().to_vec(),
            u_interior: (0..scenario.graph.edge_count()).map(|e| rec.u.interior(e).to_vec()).collect(),
        }
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("format".into(), CHECKPOINT_FORMAT.into());
        m.insert("graph_hash".into(), self.graph_hash.clone().into());
        m.insert("step".into(), self.step.into());
        m.insert("t".into(), self.t.into());
        m.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        m.insert("v".into(), serde_json::json!(self.v));
        m.insert("u_vertices".into(), serde_json::json!(self.u_vertices));
        m.insert("u_interior".into(), serde_json::json!(self.u_interior));
        Value::Object(m)
    }

    pub fn from_value(v: &Value) -> Result<Self, IoError> {
        let bad = |msg: &str| IoError::Parse {
            line: 1,
            message: msg.to_string(),
        };
        let m = v.as_object().ok_or_else(|| bad("expected an object"))?;
        if m.get("format").and_then(Value::as_str) != Some(CHECKPOINT_FORMAT) {
            return Err(bad("not a checkpoint file"));
        }
        let floats = |x: &Value| -> Result<Vec<f64>, IoError> {
            x.as_array()
                .ok_or_else(|| bad("expected an array"))?
                .iter()
                .map(|y| y.as_f64().ok_or_else(|| bad("expected a number")))
                .collect()
        };
        let nested = |key: &str| -> Result<Vec<Vec<f64>>, IoError> {
            m.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| bad(key))?
                .iter()
                .map(floats)
                .collect()
        };
        Ok(Self {
            graph_hash: m.get("graph_hash").and_then(Value::as_str).ok_or_else(|| bad("graph_hash"))?.to_string(),
            step: m.get("step").and_then(Value::as_u64).ok_or_else(|| bad("step"))? as usize,
            t: m.get("t").and_then(Value::as_f64).ok_or_else(|| bad("t"))?,
            seed: m.get("seed").and_then(Value::as_u64),
            v: nested("v")?,
            u_vertices: floats(m.get("u_vertices").ok_or_else(|| bad("u_vertices"))?)?,
            u_interior: nested("u_interior")?,
        })
    }

    /// Resume point for `scenario`; refuses checkpoints of other scenarios.
    pub fn resume(&self, scenario: &Scenario) -> Result<Resume, IoError> {
        let expected = scenario_hash(scenario);
        if expected != self.graph_hash {
            return Err(IoError::GraphHashMismatch {
                expected,
                found: self.graph_hash.clone(),
            });
        }
        let g = &scenario.graph;
        let shape_ok = self.v.len() == g.edge_count()
            && self.u_interior.len() == g.edge_count()
            && self.u_vertices.len() == g.vertex_count()
            && g.edges().iter().enumerate().all(|(k, e)| {
                self.v[k].len() == e.cells + 1 && self.u_interior[k].len() == e.cells - 1
            });
        if !shape_ok {
            return Err(IoError::Shape("array lengths differ from the grid".into()));
        }
        Ok(Resume {
            step: self.step,
            v: EdgeFunction::from_values(self.v.clone()),
            u: GraphFunction::from_parts(g, self.u_vertices.clone(), self.u_interior.clone()),
        })
    }
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// truncated checkpoint behind.
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp");
    let text = serde_json::to_string(&ck.to_value()).expect("checkpoints serialize");
    std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    Checkpoint::from_value(&v)
}

/// Nodal table `edge,node,x,u,v`.
pub fn write_solution_csv<W: Write>(out: W, graph: &MetricGraph, sol: &EllipticSolution) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["edge", "node", "x", "u", "v"])?;
    for (k, e) in graph.edges().iter().enumerate() {
        let xs = edge_nodes(graph, k);
        let u = sol.u.edge_values(k);
        for (j, x) in xs.iter().enumerate() {
            w.write_record([
                e.id.0.clone(),
                j.to_string(),
                format_number(*x),
                format_number(u[j]),
                format_number(sol.v.edge(k)[j]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Outward endpoint fluxes `a_e = −ρ(u'_e(0))`, `b_e = ρ(u'_e(ℓ_e))` per edge;
/// at every vertex the outward fluxes of the incident ends sum to `ω`.
pub fn write_flux_csv<W: Write>(out: W, graph: &MetricGraph, sol: &EllipticSolution) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["edge", "from", "to", "a", "b"])?;
    for (e, &(a, b)) in graph.edges().iter().zip(&sol.edge_fluxes) {
        w.write_record([e.id.0.clone(), e.from.0.clone(), e.to.0.clone(), format_number(a), format_number(b)])?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Panel {
    top: f64,
    height: f64,
}

impl Panel {
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = WIDTH - 150.0;

    fn draw(&self, svg: &mut String, title: &str, t: &[f64], series: &[(String, Vec<f64>)]) {
        let (t0, t1) = range(t.iter().copied());
        let (y0, y1) = range(series.iter().flat_map(|(_, ys)| ys.iter().copied()));
        let sx = |x: f64| Self::LEFT + (x - t0) / (t1 - t0) * (Self::RIGHT - Self::LEFT);
        let sy = |y: f64| self.top + self.height - (y - y0) / (y1 - y0) * self.height;
        let bottom = self.top + self.height;
        writeln!(
            svg,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            Self::LEFT,
            self.top,
            Self::RIGHT - Self::LEFT,
            self.height
        )
        .unwrap();
        writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="14">{}</text>"#, Self::LEFT, self.top - 8.0, escape(title)).unwrap();
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (tx, ty) = (t0 + f * (t1 - t0), y0 + f * (y1 - y0));
            writeln!(
                svg,
                r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{tx:.3}</text>"##,
                bottom + 5.0,
                bottom + 18.0,
                x = sx(tx)
            )
            .unwrap();
            writeln!(
                svg,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{ty:.4}</text>"##,
                Self::LEFT - 5.0,
                Self::LEFT,
                Self::LEFT - 8.0,
                sy(ty) + 4.0,
                y = sy(ty)
            )
            .unwrap();
        }
        for (i, (name, ys)) in series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = t
                .iter()
                .zip(ys)
                .filter(|(_, y)| y.is_finite())
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            )
            .unwrap();
            let ly = self.top + 14.0 + 18.0 * i as f64;
            writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
                Self::RIGHT + 12.0,
                Self::RIGHT + 32.0,
                Self::RIGHT + 38.0,
                ly + 4.0,
                escape(name)
            )
            .unwrap();
        }
    }
}

/// Two-panel chart: mass against time, and the selected vertex values
/// against time (all vertices, up to eight, when `vertices` is empty).
pub fn plot_svg(records: &[WireRecord], vertices: &[String]) -> String {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let names: Vec<String> = if vertices.is_empty() {
        records
            .first()
            .map(|r| r.vertex_values.iter().take(PALETTE.len()).map(|(k, _)| k.clone()).collect())
            .unwrap_or_default()
    } else {
        vertices.to_vec()
    };
    let vertex_series: Vec<(String, Vec<f64>)> = names
        .iter()
        .map(|n| {
            let ys = records
                .iter()
                .map(|r| r.vertex_values.iter().find(|(k, _)| k == n).map_or(f64::NAN, |&(_, u)| u))
                .collect();
            (n.clone(), ys)
        })
        .collect();
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    Panel { top: 40.0, height: 200.0 }.draw(&mut svg, "mass", &t, &[("mass".to_string(), records.iter().map(|r| r.mass).collect())]);
    Panel { top: 330.0, height: 220.0 }.draw(&mut svg, "vertex values u(v)", &t, &vertex_series);
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">t</text>"#,
        (Panel::LEFT + Panel::RIGHT) / 2.0,
        HEIGHT - 8.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}
