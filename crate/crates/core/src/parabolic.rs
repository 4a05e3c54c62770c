//! Implicit Euler for `∂_t γ_e(u) − Δ_{p_e}u = f` with vertex fluxes `ω(t)`.
//! Each step is one resolvent solve; data are sampled at the right end of
//! the step.

use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalScope, ExprError, Expression};
use crate::graph_elliptic::{resolvent, Method};
use crate::grid_functions::{integrate, integrate_map, l1_norm, EdgeFunction, GraphFunction, Nodal};
use crate::metric_graph::{MetricGraph, SourceTerm};
use crate::newton::{SolveError, SolverConfig};
use crate::nonlinearity::FluxLaw;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParabolicError {
    #[error("time grid: {0}")]
    BadTimeGrid(String),
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: SolveError,
    },
    #[error("initial datum has no finite energy")]
    InitialDatumNotFinite,
    #[error("initial datum shape: {0}")]
    InitialDatumShape(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("resume point {0} is beyond the time grid")]
    ResumeOutOfRange(usize),
    #[error("output: {0}")]
    Sink(String),
}

/// `0 = t₀ < t₁ < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid; the step count is `⌈T/dt⌉` (rounded when `T/dt` is
    /// within 1e-9 of an integer) and the last point is exactly `T`.
    pub fn uniform(t_end: f64, dt: f64) -> Result<Self, ParabolicError> {
        if !(t_end.is_finite() && t_end > 0.0 && dt.is_finite() && dt > 0.0) {
            return Err(ParabolicError::BadTimeGrid(format!("t_end = {t_end}, dt = {dt}")));
        }
        let ratio = t_end / dt;
        let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
            ratio.round()
        } else {
            ratio.ceil()
        } as usize;
        let n = n.max(1);
        let times = (0..=n)
            .map(|i| if i == n { t_end } else { t_end * i as f64 / n as f64 })
            .collect();
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self, ParabolicError> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(ParabolicError::BadTimeGrid("needs t₀ = 0 and at least one step".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(ParabolicError::BadTimeGrid("times must increase strictly".into()));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// `τ_i = t_i − t_{i−1}` for `i ≥ 1`.
    pub fn step(&self, i: usize) -> f64 {
        self.times[i] - self.times[i - 1]
    }

    pub fn max_step(&self) -> f64 {
        (1..self.times.len()).map(|i| self.step(i)).fold(0.0, f64::max)
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Source on one edge.
#[derive(Debug, Clone)]
pub enum Forcing {
    Term(SourceTerm),
    /// Time-independent nodal values.
    Nodal(Vec<f64>),
}

/// Flux at one vertex as a function of time.
#[derive(Debug, Clone)]
pub enum VertexFlux {
    Constant(f64),
    Expr(Arc<Expression>),
    /// Piecewise constant: the value of the last breakpoint `≤ t`, or the
    /// first value before the first breakpoint.
    Table(Vec<(f64, f64)>),
}

impl VertexFlux {
    pub fn at(&self, t: f64) -> Result<f64, ExprError> {
        match self {
            VertexFlux::Constant(c) => Ok(*c),
            VertexFlux::Expr(e) => e.evaluate(EvalScope::new(0.0, t)),
            VertexFlux::Table(pts) => Ok(pts
                .iter()
                .take_while(|(tk, _)| *tk <= t)
                .last()
                .or(pts.first())
                .map_or(0.0, |&(_, w)| w)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub forcing: Vec<Forcing>,
    pub omega: Vec<VertexFlux>,
}

impl Schedule {
    /// Edge sources taken from the graph, zero vertex fluxes.
    pub fn from_graph(graph: &MetricGraph) -> Self {
        Self {
            forcing: graph.edges().iter().map(|e| Forcing::Term(e.source.clone())).collect(),
            omega: vec![VertexFlux::Constant(0.0); graph.vertex_count()],
        }
    }

    pub fn zero(graph: &MetricGraph) -> Self {
        Self {
            forcing: graph.edges().iter().map(|e| Forcing::Nodal(vec![0.0; e.cells + 1])).collect(),
            omega: vec![VertexFlux::Constant(0.0); graph.vertex_count()],
        }
    }

    pub fn with_flux(mut self, vertex: usize, flux: VertexFlux) -> Self {
        self.omega[vertex] = flux;
        self
    }

    pub fn with_forcing(mut self, edge: usize, forcing: Forcing) -> Self {
        self.forcing[edge] = forcing;
        self
    }

    pub fn forcing_at(&self, graph: &MetricGraph, t: f64) -> Result<EdgeFunction, ExprError> {
        EdgeFunction::try_from_fn(graph, |e, x| match &self.forcing[e] {
            Forcing::Term(s) => s.eval(t, x),
            Forcing::Nodal(_) => Ok(0.0),
        })
        .map(|mut f| {
            for (e, forcing) in self.forcing.iter().enumerate() {
                if let Forcing::Nodal(values) = forcing {
                    f.edge_mut(e).copy_from_slice(values);
                }
            }
            f
        })
    }

    pub fn omega_at(&self, t: f64) -> Result<Vec<f64>, ExprError> {
        self.omega.iter().map(|w| w.at(t)).collect()
    }
}

/// State after one step, with its ledger entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub t: f64,
    pub tau: f64,
    pub v: EdgeFunction,
    pub u: GraphFunction,
    /// `∫ v`.
    pub mass: f64,
    /// `∫ j*_γ̄(v)`.
    pub energy: f64,
    /// `τ Σ_e ∫|u'|^{p_e}`.
    pub dissipation: f64,
    /// `τ (∫ f u + Σ_v ω(v) u(v))`.
    pub work: f64,
    /// `energy − energy_prev + dissipation − work`; nonpositive in exact
    /// arithmetic.
    pub energy_residual: f64,
    /// `mass − mass_prev − τ(∫f + Σω)`.
    pub mass_defect: f64,
    pub residual_sup: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Record 0 holds the initial datum.
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("trajectory holds the initial record")
    }
}

/// Starting point of a (possibly resumed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct Resume {
    pub step: usize,
    pub v: EdgeFunction,
    pub u: GraphFunction,
}

/// `u = γ̄⁻¹(v)` edge by edge; vertex values from the first incident edge.
pub fn invert_gamma(graph: &MetricGraph, v: &EdgeFunction) -> GraphFunction {
    let u = v.map_edges(|e, s| graph.edge(e).gamma.inverse(s));
    GraphFunction::from_edge_function(graph, &u, f64::INFINITY).expect("shape checked by caller")
}

/// `∫ j*_γ̄(v)` by nodal quadrature.
pub fn conjugate_energy(graph: &MetricGraph, v: &EdgeFunction) -> f64 {
    integrate_map(graph, v, |e, s| graph.edge(e).gamma.conjugate(s)).unwrap_or(f64::NAN)
}

/// `Σ_e Σ_cells h |δ|^{p_e}`.
pub fn gradient_energy(graph: &MetricGraph, u: &GraphFunction) -> f64 {
    graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let h = e.h();
            (1..=e.cells)
                .map(|j| h * ((u.at(k, j) - u.at(k, j - 1)) / h).abs().powf(e.p))
                .sum::<f64>()
        })
        .sum()
}

/// Complete description of a run.
#[derive(Debug, Clone)]
pub struct Evolution<'a> {
    pub graph: &'a MetricGraph,
    pub schedule: &'a Schedule,
    pub grid: &'a TimeGrid,
    pub cfg: &'a SolverConfig,
    pub method: Method,
}

/// Runs the whole grid from `v0` with the monolithic solver.
pub fn solve_parabolic(
    graph: &MetricGraph,
    v0: &EdgeFunction,
    schedule: &Schedule,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory, ParabolicError> {
    let run = Evolution {
        graph,
        schedule,
        grid,
        cfg,
        method: Method::Monolithic,
    };
    run.evolve(v0, None, |_| Ok(()))
}

impl Evolution<'_> {
    pub fn initial_record(&self, v0: &EdgeFunction) -> Result<StepRecord, ParabolicError> {
        crate::grid_functions::check_shape(self.graph, v0)
            .map_err(|e| ParabolicError::InitialDatumShape(e.to_string()))?;
        let energy = conjugate_energy(self.graph, v0);
        if !energy.is_finite() || v0.values().iter().flatten().any(|x| !x.is_finite()) {
            return Err(ParabolicError::InitialDatumNotFinite);
        }
        Ok(StepRecord {
            index: 0,
            t: self.grid.times()[0],
            tau: 0.0,
            v: v0.clone(),
            u: invert_gamma(self.graph, v0),
            mass: integrate(self.graph, v0).unwrap_or(f64::NAN),
            energy,
            dissipation: 0.0,
            work: 0.0,
            energy_residual: 0.0,
            mass_defect: 0.0,
            residual_sup: 0.0,
            newton_iters: 0,
        })
    }

    /// Steps from `v0`, or from `resume` when given, passing every new record
    /// (the initial one included when not resuming) to `sink`. The returned
    /// trajectory holds the starting record followed by the new ones.
    pub fn evolve(
        &self,
        v0: &EdgeFunction,
        resume: Option<Resume>,
        mut sink: impl FnMut(&StepRecord) -> Result<(), String>,
    ) -> Result<Trajectory, ParabolicError> {
        let start = match resume {
            None => {
                let first = self.initial_record(v0)?;
                sink(&first).map_err(ParabolicError::Sink)?;
                first
            }
            Some(r) => {
                if r.step > self.grid.steps() {
                    return Err(ParabolicError::ResumeOutOfRange(r.step));
                }
                if r.step == 0 {
                    self.initial_record(&r.v)?
                } else {
                    self.record_from_state(r)
                }
            }
        };
        let mut records = vec![start];
        for i in records[0].index + 1..=self.grid.steps() {
            let next = self.step(records.last().unwrap(), i)?;
            sink(&next).map_err(ParabolicError::Sink)?;
            records.push(next);
        }
        Ok(Trajectory { records })
    }

    fn record_from_state(&self, r: Resume) -> StepRecord {
        StepRecord {
            index: r.step,
            t: self.grid.times()[r.step],
            tau: self.grid.step(r.step),
            mass: integrate(self.graph, &r.v).unwrap_or(f64::NAN),
            energy: conjugate_energy(self.graph, &r.v),
            v: r.v,
            u: r.u,
            dissipation: 0.0,
            work: 0.0,
            energy_residual: 0.0,
            mass_defect: 0.0,
            residual_sup: 0.0,
            newton_iters: 0,
        }
    }

    /// Advances `prev` to grid point `i`.
    pub fn step(&self, prev: &StepRecord, i: usize) -> Result<StepRecord, ParabolicError> {
        let graph = self.graph;
        let t = self.grid.times()[i];
        let tau = self.grid.step(i);
        let f = self.schedule.forcing_at(graph, t)?;
        let omega = self.schedule.omega_at(t)?;
        let sol = resolvent(graph, tau, &prev.v, &f, &omega, self.cfg, self.method, Some(&prev.u))
            .map_err(|source| ParabolicError::Step { step: i, source })?;
        let mass = integrate(graph, &sol.v).unwrap_or(f64::NAN);
        let energy = conjugate_energy(graph, &sol.v);
        let dissipation = tau * gradient_energy(graph, &sol.u);
        let fu = integrate(graph, &f.zip_with(&sol.u.to_edge_function(), |a, b| a * b)).unwrap_or(f64::NAN);
        let wu: f64 = omega.iter().zip(sol.u.vertex_values()).map(|(w, u)| w * u).sum();
        let work = tau * (fu + wu);
        let supply = tau * (integrate(graph, &f).unwrap_or(f64::NAN) + omega.iter().sum::<f64>());
        Ok(StepRecord {
            index: i,
            t,
            tau,
            mass,
            energy,
            dissipation,
            work,
            energy_residual: energy - prev.energy + dissipation - work,
            mass_defect: mass - prev.mass - supply,
            residual_sup: sol.residual_sup,
            newton_iters: sol.work,
            v: sol.v,
            u: sol.u,
        })
    }
}

/// Per-step energy ledger residuals `r_i` (index `i − 1` holds step `i`)
/// together with the scale each one should be compared against.
pub fn energy_ledger(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.records
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let scale = 1.0 + prev.energy.abs() + cur.energy.abs() + cur.dissipation.abs() + cur.work.abs();
            (cur.energy_residual, scale)
        })
        .collect()
}

/// Outcome of a step-halving study.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalOrder {
    Estimated {
        order: f64,
        /// `∥v_{dt/2^k}(T) − v_{dt/2^{k+1}}(T)∥₁` for `k = 0, 1, 2`.
        differences: Vec<f64>,
        /// `∥v_{dt/2^k}(T) − v_{dt/8}(T)∥₁` for `k = 0, 1, 2`.
        errors: Vec<f64>,
    },
    /// All differences are at rounding level.
    NotApplicable { differences: Vec<f64> },
}

/// Runs at `dt`, `dt/2`, `dt/4`, `dt/8`; the order is
/// `log₂(d₁/d₂)` from the two finest successive differences.
pub fn richardson_order(
    graph: &MetricGraph,
    schedule: &Schedule,
    v0: &EdgeFunction,
    t_end: f64,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<TemporalOrder, ParabolicError> {
    let finals: Vec<EdgeFunction> = (0..4)
        .map(|k| {
            let grid = TimeGrid::uniform(t_end, dt / f64::powi(2.0, k))?;
            Ok(solve_parabolic(graph, v0, schedule, &grid, cfg)?.last().v.clone())
        })
        .collect::<Result<_, ParabolicError>>()?;
    let dist = |a: &EdgeFunction, b: &EdgeFunction| l1_norm(graph, &a.zip_with(b, |x, y| x - y)).unwrap_or(f64::NAN);
    let differences: Vec<f64> = finals.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let size = 1.0 + l1_norm(graph, &finals[3]).unwrap_or(0.0);
    if differences.iter().all(|&d| d <= 1e-12 * size) {
        return Ok(TemporalOrder::NotApplicable { differences });
    }
    let errors = finals[..3].iter().map(|v| dist(v, &finals[3])).collect();
    let order = (differences[1] / differences[2]).log2();
    Ok(TemporalOrder::Estimated {
        order,
        differences,
        errors,
    })
}

/// Flux `|s|^{p−2}s` used when reporting edge fluxes of a trajectory state.
pub fn cell_fluxes(graph: &MetricGraph, u: &GraphFunction, edge: usize) -> Vec<f64> {
    let e = graph.edge(edge);
    let law = FluxLaw::exact(e.p);
    let h = e.h();
    (1..=e.cells).map(|j| law.rho((u.at(edge, j) - u.at(edge, j - 1)) / h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::{Edge, GraphSpec};
    use crate::nonlinearity::Nonlinearity;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn path(gamma: Nonlinearity, p: f64) -> MetricGraph {
        MetricGraph::build(GraphSpec::new(
            &["a", "b", "c"],
            vec![
                Edge::new("e1", "a", "b", 1.0, p).with_cells(16).with_gamma(gamma.clone()),
                Edge::new("e2", "b", "c", 0.5, p).with_cells(8).with_gamma(gamma),
            ],
        ))
        .unwrap()
    }

    #[test]
    fn uniform_grid_ends_exactly() {
        let g = TimeGrid::uniform(1.0, 0.1).unwrap();
        assert_eq!(g.steps(), 10);
        assert_eq!(g.t_end(), 1.0);
        let g = TimeGrid::uniform(1.0, 0.3).unwrap();
        assert_eq!(g.steps(), 4);
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn zero_data_stay_zero() {
        let g = path(Nonlinearity::Identity, 3.0);
        let traj = solve_parabolic(
            &g,
            &EdgeFunction::zeros(&g),
            &Schedule::zero(&g),
            &TimeGrid::uniform(0.5, 0.1).unwrap(),
            &cfg(),
        )
        .unwrap();
        assert_eq!(traj.records.len(), 6);
        for r in &traj.records {
            assert!(r.v.sup_norm() == 0.0);
            assert!(r.energy_residual == 0.0);
        }
    }

    #[test]
    fn constant_porous_medium_run_is_exact() {
        let g = path(Nonlinearity::power(3.0).unwrap(), 2.0);
        let sched = Schedule {
            forcing: g.edges().iter().map(|e| Forcing::Nodal(vec![1.0; e.cells + 1])).collect(),
            omega: vec![VertexFlux::Constant(0.0); 3],
        };
        let traj = solve_parabolic(&g, &EdgeFunction::zeros(&g), &sched, &TimeGrid::uniform(1.0, 0.1).unwrap(), &cfg())
            .unwrap();
        for r in &traj.records[1..] {
            for x in r.v.values().iter().flatten() {
                assert!((x - r.t).abs() < 1e-8);
            }
            for x in r.u.to_dofs() {
                assert!((x - r.t.cbrt()).abs() < 1e-8);
            }
            assert!(r.energy_residual <= 1e-8);
        }
    }

    #[test]
    fn mass_and_energy_ledgers_hold() {
        let g = path(Nonlinearity::power(0.5).unwrap(), 3.0);
        let v0 = EdgeFunction::from_fn(&g, |e, x| (e as f64 + 1.0) * (3.0 * x).sin());
        let sched = Schedule::zero(&g)
            .with_flux(0, VertexFlux::Constant(0.5))
            .with_flux(2, VertexFlux::Table(vec![(0.0, -0.2), (0.3, 0.1)]));
        let traj = solve_parabolic(&g, &v0, &sched, &TimeGrid::uniform(0.6, 0.05).unwrap(), &cfg()).unwrap();
        for r in &traj.records[1..] {
            assert!(r.mass_defect.abs() < 1e-9, "{}", r.mass_defect);
        }
        for (r, scale) in energy_ledger(&traj) {
            assert!(r <= 1e-8 * scale, "{r}");
        }
    }

    #[test]
    fn resume_is_bit_identical() {
        let g = path(Nonlinearity::power(2.0).unwrap(), 1.5);
        let v0 = EdgeFunction::from_fn(&g, |_, x| x - 0.4);
        let sched = Schedule::zero(&g);
        let grid = TimeGrid::uniform(0.5, 0.05).unwrap();
        let c = cfg();
        let run = Evolution {
            graph: &g,
            schedule: &sched,
            grid: &grid,
            cfg: &c,
            method: Method::Monolithic,
        };
        let full = run.evolve(&v0, None, |_| Ok(())).unwrap();
        let at5 = &full.records[5];
        let resumed = run
            .evolve(
                &v0,
                Some(Resume {
                    step: 5,
                    v: at5.v.clone(),
                    u: at5.u.clone(),
                }),
                |_| Ok(()),
            )
            .unwrap();
        for (a, b) in full.records[6..].iter().zip(&resumed.records[1..]) {
            assert_eq!(a.v, b.v);
            assert_eq!(a.u, b.u);
        }
    }

    #[test]
    fn steady_datum_has_no_order() {
        let g = path(Nonlinearity::Identity, 2.0);
        let v0 = EdgeFunction::constant(&g, 1.5);
        let res = richardson_order(&g, &Schedule::zero(&g), &v0, 0.2, 0.05, &cfg()).unwrap();
        assert!(matches!(res, TemporalOrder::NotApplicable { .. }));
    }
}
