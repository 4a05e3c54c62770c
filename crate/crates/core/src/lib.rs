//! Doubly nonlinear diffusion `∂_t γ_e(u) − Δ_{p_e} u = f` on compact metric
//! graphs with generalized Neumann–Kirchhoff vertex fluxes.
//!
//! The elliptic problem `α γ̄(u) − Δ_{p̄} u = g`, `∂_ν u = ω` is solved either
//! monolithically by damped Newton with continuation or by gluing edge
//! solutions on a tree of cuts. The evolution problem is stepped by implicit
//! Euler through the resolvent. [`diagnostics`] turns the structural
//! properties of both problems into checkable reports.

pub mod diagnostics;
pub mod edge_solver;
pub mod expr;
pub mod graph_elliptic;
pub mod grid_functions;
pub mod io;
pub mod metric_graph;
pub mod newton;
pub mod nonlinearity;
pub mod parabolic;
pub mod scenario;

pub use diagnostics::{DiagnosticError, PropertyReport};
pub use edge_solver::{solve_edge_bvp, EdgeBvp, EdgeSolution};
pub use expr::{parse_expression, EvalScope, ExprError, Expression};
pub use graph_elliptic::{
    decompose_edge_fluxes, resolvent, solve, solve_by_gluing, solve_monolithic, EllipticProblem, EllipticSolution,
    Method,
};
pub use grid_functions::{EdgeFunction, GraphFunction, GridError, PBar};
pub use io::{Checkpoint, IoError, WireRecord};
pub use metric_graph::{Edge, EdgeId, GraphError, GraphSpec, MetricGraph, SourceTerm, VertexId};
pub use newton::{SolveError, SolverConfig};
pub use nonlinearity::{FluxLaw, Nonlinearity, NonlinearityError};
pub use parabolic::{
    solve_parabolic, Evolution, ParabolicError, Resume, Schedule, StepRecord, TimeGrid, Trajectory, VertexFlux,
};
pub use scenario::{load_scenario, Scenario, ScenarioDoc, ScenarioError};

/// Any failure of the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Parabolic(#[from] ParabolicError),
    #[error(transparent)]
    Diagnostic(#[from] DiagnosticError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl Error {
    /// Exit code of the command-line tool: 2 for bad input, 1 for solver
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solve(_) | Error::Parabolic(ParabolicError::Step { .. }) | Error::Diagnostic(DiagnosticError::Solve(_)) => 1,
            Error::Parabolic(ParabolicError::Sink(_)) => 1,
            Error::Io(IoError::Io { .. }) => 1,
            _ => 2,
        }
    }
}
