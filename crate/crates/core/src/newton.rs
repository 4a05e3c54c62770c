//! Regularised damped Newton for the lumped P1 discretisation of
//! `α γ_e(u) − (ρ_{p_e}(u'))' = g` on a graph with vertex fluxes `ω`.
//!
//! Unknowns are the vertex values followed by the interior nodes of every
//! edge. The Jacobian is a sum of cell stiffness blocks plus a positive
//! diagonal, so it is solved exactly by eliminating each edge's tridiagonal
//! interior block and factorising the small dense vertex Schur complement.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid_functions::node_weight;
use crate::nonlinearity::{FluxLaw, Nonlinearity};

/// Nonlinear solver settings shared by edge, graph and gluing solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative residual tolerance for Newton.
    pub tol: f64,
    /// Vertex value mismatch accepted by the shooting and gluing solvers.
    pub match_tol: f64,
    pub max_newton: usize,
    pub max_backtracks: usize,
    /// First and last regularisation parameters of the continuation.
    pub eps_start: f64,
    pub eps_final: f64,
    pub picard_iters: usize,
    /// Bracket doublings allowed when shooting on a flux.
    pub max_doublings: usize,
    /// Stop a bracketing search once the bracket is narrower than this.
    pub bracket_width: f64,
    pub max_bracket_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            match_tol: 1e-8,
            max_newton: 60,
            max_backtracks: 30,
            eps_start: 1e-2,
            eps_final: 1e-10,
            picard_iters: 50,
            max_doublings: 60,
            bracket_width: 1e-12,
            max_bracket_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("Newton iteration failed to converge (best residual {best_residual:e})")]
    NewtonDiverged {
        best_residual: f64,
        history: Vec<f64>,
        best_iterate: Vec<f64>,
    },
    #[error("no sign change of the matching function after {0} bracket doublings")]
    BracketNotFound(usize),
    #[error("array length {found} does not match the grid ({expected})")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Graph(#[from] crate::metric_graph::GraphError),
}

/// One edge of a discrete problem.
#[derive(Debug, Clone)]
pub(crate) struct EdgeBlock<'a> {
    pub cells: usize,
    pub h: f64,
    pub p: f64,
    pub gamma: &'a Nonlinearity,
    /// Nodal load `g`, length `cells + 1`.
    pub load: &'a [f64],
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Problem<'a> {
    pub blocks: Vec<EdgeBlock<'a>>,
    pub vertex_count: usize,
    pub omega: Vec<f64>,
    pub alpha: f64,
    offsets: Vec<usize>,
    dofs: usize,
}

impl<'a> Problem<'a> {
    pub fn new(blocks: Vec<EdgeBlock<'a>>, vertex_count: usize, omega: Vec<f64>, alpha: f64) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut next = vertex_count;
        for b in &blocks {
            offsets.push(next);
            next += b.cells - 1;
        }
        Self {
            blocks,
            vertex_count,
            omega,
            alpha,
            offsets,
            dofs: next,
        }
    }

    #[cfg(test)]
    pub fn dofs(&self) -> usize {
        self.dofs
    }

    /// Global dof of node `j` on edge `k`.
    #[inline]
    pub fn dof(&self, k: usize, j: usize) -> usize {
        let b = &self.blocks[k];
        if j == 0 {
            b.from
        } else if j == b.cells {
            b.to
        } else {
            self.offsets[k] + j - 1
        }
    }

    pub fn edge_nodes(&self, k: usize, u: &[f64]) -> Vec<f64> {
        (0..=self.blocks[k].cells).map(|j| u[self.dof(k, j)]).collect()
    }
}

/// Regularisation used for one continuation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stage {
    pub eps_rho: f64,
    /// Added to γ as `ε_γ·u` in the residual; zero in the final stage.
    pub eps_gamma: f64,
    /// Floor and inverse ceiling applied to γ' in the Jacobian.
    pub clamp: f64,
}

impl Stage {
    pub fn final_stage(cfg: &SolverConfig) -> Self {
        Stage {
            eps_rho: cfg.eps_final,
            eps_gamma: 0.0,
            clamp: cfg.eps_final,
        }
    }

    pub fn continuation(eps: f64, cfg: &SolverConfig) -> Self {
        Stage {
            eps_rho: eps,
            eps_gamma: eps,
            clamp: cfg.eps_final,
        }
    }

    /// Flux law on an edge with exponent `p`. Without continuation the
    /// unregularised law is used whenever it is differentiable (`p ≥ 2`).
    #[inline]
    pub fn law(&self, p: f64) -> FluxLaw {
        if self.eps_gamma == 0.0 && p >= 2.0 {
            FluxLaw::exact(p)
        } else {
            FluxLaw::new(p, self.eps_rho)
        }
    }

    #[inline]
    fn gamma(&self, g: &Nonlinearity, u: f64) -> f64 {
        g.eval(u) + self.eps_gamma * u
    }

    #[inline]
    fn gamma_prime(&self, g: &Nonlinearity, u: f64) -> f64 {
        let d = g.derivative(u);
        let d = if d.is_nan() { 1.0 / self.clamp } else { d };
        d.clamp(self.clamp, 1.0 / self.clamp) + self.eps_gamma
    }
}

/// Nodal rows `α m_j γ(u_j) − m_j g_j + ρ(δ_j) − ρ(δ_{j+1})` of one edge,
/// without boundary flux data.
pub(crate) fn edge_rows(
    block: &EdgeBlock<'_>,
    alpha: f64,
    stage: Stage,
    u: &[f64],
    rows: &mut [f64],
) {
    let n = block.cells;
    let law = stage.law(block.p);
    for j in 0..=n {
        let m = node_weight(block.h, n, j);
        rows[j] = alpha * m * stage.gamma(block.gamma, u[j]) - m * block.load[j];
    }
    for c in 1..=n {
        let flux = law.rho((u[c] - u[c - 1]) / block.h);
        rows[c] += flux;
        rows[c - 1] -= flux;
    }
}

/// Cell conductances `ρ'(δ_c)/h` and nodal diagonal `α m_j γ'(u_j)`.
pub(crate) fn edge_jacobian(
    block: &EdgeBlock<'_>,
    alpha: f64,
    stage: Stage,
    u: &[f64],
    cond: &mut [f64],
    diag: &mut [f64],
) {
    edge_jacobian_with(block, alpha, stage, stage.law(block.p), u, cond, diag);
}

pub(crate) fn edge_jacobian_with(
    block: &EdgeBlock<'_>,
    alpha: f64,
    stage: Stage,
    law: FluxLaw,
    u: &[f64],
    cond: &mut [f64],
    diag: &mut [f64],
) {
    let n = block.cells;
    for j in 0..=n {
        let m = node_weight(block.h, n, j);
        diag[j] = alpha * m * stage.gamma_prime(block.gamma, u[j]);
    }
    for c in 1..=n {
        cond[c - 1] = law.rho_prime((u[c] - u[c - 1]) / block.h) / block.h;
    }
}

/// Reaction-plus-load scale used to make tolerances relative.
pub(crate) fn residual_scale(prob: &Problem<'_>, u: &[f64]) -> f64 {
    let mut scale: f64 = 1.0;
    let mut nodes = Vec::new();
    for (k, b) in prob.blocks.iter().enumerate() {
        nodes.clear();
        nodes.extend((0..=b.cells).map(|j| u[prob.dof(k, j)]));
        for j in 0..=b.cells {
            let m = node_weight(b.h, b.cells, j);
            scale = scale.max(prob.alpha * m * b.gamma.eval(nodes[j]).abs() + m * b.load[j].abs());
        }
    }
    for w in &prob.omega {
        scale = scale.max(w.abs());
    }
    scale
}

pub(crate) fn residual(prob: &Problem<'_>, stage: Stage, u: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.resize(prob.dofs, 0.0);
    for (v, w) in prob.omega.iter().enumerate() {
        out[v] = -w;
    }
    let mut nodes = Vec::new();
    let mut rows = Vec::new();
    for (k, b) in prob.blocks.iter().enumerate() {
        nodes.clear();
        nodes.extend((0..=b.cells).map(|j| u[prob.dof(k, j)]));
        rows.resize(b.cells + 1, 0.0);
        edge_rows(b, prob.alpha, stage, &nodes, &mut rows);
        for (j, r) in rows.iter().enumerate() {
            out[prob.dof(k, j)] += r;
        }
    }
}

struct LinearParts {
    cond: Vec<Vec<f64>>,
    diag: Vec<Vec<f64>>,
}

fn jacobian(prob: &Problem<'_>, stage: Stage, u: &[f64]) -> LinearParts {
    let mut cond = Vec::with_capacity(prob.blocks.len());
    let mut diag = Vec::with_capacity(prob.blocks.len());
    for (k, b) in prob.blocks.iter().enumerate() {
        let nodes = prob.edge_nodes(k, u);
        let mut c = vec![0.0; b.cells];
        let mut d = vec![0.0; b.cells + 1];
        edge_jacobian(b, prob.alpha, stage, &nodes, &mut c, &mut d);
        cond.push(c);
        diag.push(d);
    }
    LinearParts { cond, diag }
}

/// Solves `J x = rhs` where `J = Σ_cells c (e_i − e_j)(e_i − e_j)ᵀ + diag`.
fn solve_linear(prob: &Problem<'_>, parts: &LinearParts, rhs: &[f64]) -> Option<Vec<f64>> {
    let nv = prob.vertex_count;
    let mut schur = DMatrix::<f64>::zeros(nv, nv);
    let mut vrhs = DVector::<f64>::from_column_slice(&rhs[..nv]);
    // Interior solves kept for back substitution: (y, z_from, z_to).
    let mut kept = Vec::with_capacity(prob.blocks.len());
    for (k, b) in prob.blocks.iter().enumerate() {
        let c = &parts.cond[k];
        let d = &parts.diag[k];
        let n = b.cells;
        schur[(b.from, b.from)] += d[0] + c[0];
        schur[(b.to, b.to)] += d[n] + c[n - 1];
        if n == 1 {
            schur[(b.from, b.to)] -= c[0];
            schur[(b.to, b.from)] -= c[0];
            kept.push(None);
            continue;
        }
        let m = n - 1;
        // Interior tridiagonal: node i (1-based j = i + 1).
        let main: Vec<f64> = (0..m).map(|i| d[i + 1] + c[i] + c[i + 1]).collect();
        let off: Vec<f64> = (0..m.saturating_sub(1)).map(|i| -c[i + 1]).collect();
        let r = &rhs[prob.offsets[k]..prob.offsets[k] + m];
        let mut e_first = vec![0.0; m];
        e_first[0] = -c[0];
        let mut e_last = vec![0.0; m];
        e_last[m - 1] = -c[n - 1];
        let [y, z_from, z_to] = thomas3(&main, &off, [r.to_vec(), e_first, e_last])?;
        // S = A_vv − B T⁻¹ Bᵀ, rhs_v −= B y, with B holding −c at the ends.
        let (bf, bt) = (-c[0], -c[n - 1]);
        schur[(b.from, b.from)] -= bf * z_from[0];
        schur[(b.from, b.to)] -= bf * z_to[0];
        schur[(b.to, b.from)] -= bt * z_from[m - 1];
        schur[(b.to, b.to)] -= bt * z_to[m - 1];
        vrhs[b.from] -= bf * y[0];
        vrhs[b.to] -= bt * y[m - 1];
        kept.push(Some((y, z_from, z_to)));
    }
    let xv = if nv <= 8 {
        schur.lu().solve(&vrhs)?
    } else {
        schur.clone().cholesky().map(|ch| ch.solve(&vrhs)).or_else(|| schur.lu().solve(&vrhs))?
    };
    let mut x = vec![0.0; prob.dofs];
    x[..nv].copy_from_slice(xv.as_slice());
    for (k, b) in prob.blocks.iter().enumerate() {
        if let Some((y, zf, zt)) = &kept[k] {
            let off = prob.offsets[k];
            for i in 0..y.len() {
                x[off + i] = y[i] - zf[i] * xv[b.from] - zt[i] * xv[b.to];
            }
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Symmetric tridiagonal solve for three right-hand sides.
fn thomas3(main: &[f64], off: &[f64], mut rhs: [Vec<f64>; 3]) -> Option<[Vec<f64>; 3]> {
    let m = main.len();
    let mut cp = vec![0.0; m];
    let mut denom = main[0];
    if denom == 0.0 {
        return None;
    }
    for r in rhs.iter_mut() {
        r[0] /= denom;
    }
    for i in 1..m {
        cp[i - 1] = off[i - 1] / denom;
        denom = main[i] - off[i - 1] * cp[i - 1];
        if denom == 0.0 {
            return None;
        }
        for r in rhs.iter_mut() {
            r[i] = (r[i] - off[i - 1] * r[i - 1]) / denom;
        }
    }
    for i in (0..m.saturating_sub(1)).rev() {
        for r in rhs.iter_mut() {
            r[i] -= cp[i] * r[i + 1];
        }
    }
    Some(rhs)
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonRun {
    pub u: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_sup: f64,
    pub history: Vec<f64>,
}

/// Damped Newton with Armijo backtracking on the residual 2-norm.
pub(crate) fn newton(prob: &Problem<'_>, stage: Stage, u0: Vec<f64>, cfg: &SolverConfig) -> NewtonRun {
    let mut u = u0;
    let mut r = Vec::new();
    residual(prob, stage, &u, &mut r);
    let mut history = vec![norm_inf(&r)];
    let mut trial = vec![0.0; u.len()];
    let mut r_trial = Vec::new();
    for it in 0..cfg.max_newton {
        let sup = norm_inf(&r);
        if !sup.is_finite() {
            break;
        }
        if sup <= cfg.tol * residual_scale(prob, &u) {
            // One more full step usually lands at rounding level.
            let parts = jacobian(prob, stage, &u);
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            if let Some(du) = solve_linear(prob, &parts, &neg) {
                for i in 0..u.len() {
                    trial[i] = u[i] + du[i];
                }
                residual(prob, stage, &trial, &mut r_trial);
                if norm_inf(&r_trial) < sup {
                    std::mem::swap(&mut u, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                }
            }
            let residual_sup = norm_inf(&r);
            history.push(residual_sup);
            return NewtonRun {
                u,
                converged: true,
                iterations: it,
                residual_sup,
                history,
            };
        }
        let parts = jacobian(prob, stage, &u);
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let Some(du) = solve_linear(prob, &parts, &neg) else {
            break;
        };
        let f0 = norm2(&r);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_backtracks {
            for i in 0..u.len() {
                trial[i] = u[i] + lambda * du[i];
            }
            residual(prob, stage, &trial, &mut r_trial);
            let f1 = norm2(&r_trial);
            if f1.is_finite() && f1 <= (1.0 - 1e-4 * lambda) * f0 {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        history.push(norm_inf(&r));
    }
    let sup = norm_inf(&r);
    let converged = sup <= cfg.tol * residual_scale(prob, &u);
    NewtonRun {
        u,
        converged,
        iterations: cfg.max_newton,
        residual_sup: sup,
        history,
    }
}

/// Fixed-point iteration with frozen secant coefficients (Kačanov type).
fn picard(prob: &Problem<'_>, stage: Stage, mut u: Vec<f64>, iters: usize) -> Vec<f64> {
    let mut r = Vec::new();
    for _ in 0..iters {
        let mut cond = Vec::with_capacity(prob.blocks.len());
        let mut diag = Vec::with_capacity(prob.blocks.len());
        for (k, b) in prob.blocks.iter().enumerate() {
            let nodes = prob.edge_nodes(k, &u);
            let law = stage.law(b.p);
            let c: Vec<f64> = (1..=b.cells)
                .map(|c| {
                    let s = (nodes[c] - nodes[c - 1]) / b.h;
                    let secant = if s.abs() > 1e-300 { law.rho(s) / s } else { law.rho_prime(0.0) };
                    secant.clamp(stage.clamp, 1.0 / stage.clamp) / b.h
                })
                .collect();
            let d: Vec<f64> = (0..=b.cells)
                .map(|j| {
                    let m = node_weight(b.h, b.cells, j);
                    let x = nodes[j];
                    let secant = if x.abs() > 1e-300 {
                        stage.gamma(b.gamma, x) / x
                    } else {
                        stage.gamma_prime(b.gamma, 0.0)
                    };
                    prob.alpha * m * secant.clamp(stage.clamp, 1.0 / stage.clamp)
                })
                .collect();
            cond.push(c);
            diag.push(d);
        }
        let parts = LinearParts { cond, diag };
        // Frozen operator applied to the new iterate must match the data:
        // (D + K) u_new = rhs, with rhs = (D + K) u − R(u).
        residual(prob, stage, &u, &mut r);
        let ku = apply(prob, &parts, &u);
        let rhs: Vec<f64> = ku.iter().zip(&r).map(|(a, b)| a - b).collect();
        match solve_linear(prob, &parts, &rhs) {
            Some(next) => u = next,
            None => break,
        }
    }
    u
}

fn apply(prob: &Problem<'_>, parts: &LinearParts, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; prob.dofs];
    for (k, b) in prob.blocks.iter().enumerate() {
        for j in 0..=b.cells {
            let i = prob.dof(k, j);
            out[i] += parts.diag[k][j] * u[i];
        }
        for c in 1..=b.cells {
            let (i, j) = (prob.dof(k, c - 1), prob.dof(k, c));
            let flow = parts.cond[k][c - 1] * (u[i] - u[j]);
            out[i] += flow;
            out[j] -= flow;
        }
    }
    out
}

/// Constant `c` with `Σ_e ∫ α γ_e(c) = ∫ g + Σ ω`, the exact solution when
/// the data are constant.
pub(crate) fn constant_guess(prob: &Problem<'_>) -> f64 {
    let mut target = prob.omega.iter().sum::<f64>();
    let mut total_len = 0.0;
    for b in &prob.blocks {
        for j in 0..=b.cells {
            target += node_weight(b.h, b.cells, j) * b.load[j];
        }
        total_len += b.h * b.cells as f64;
    }
    let mass = |c: f64| -> f64 {
        prob.blocks
            .iter()
            .map(|b| prob.alpha * b.h * b.cells as f64 * b.gamma.eval(c))
            .sum::<f64>()
    };
    if target == 0.0 {
        return 0.0;
    }
    if prob.blocks.iter().all(|b| b.gamma == prob.blocks[0].gamma) {
        return prob.blocks[0].gamma.inverse(target / (prob.alpha * total_len));
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mass(lo) > target {
        lo *= 2.0;
        if lo < -1e150 {
            return 0.0;
        }
    }
    while mass(hi) < target {
        hi *= 2.0;
        if hi > 1e150 {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub u: Vec<f64>,
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub continuation_steps: usize,
}

/// Full solve: direct Newton on the target model from the warm start, then
/// continuation in the regularisation from the constant guess, with a
/// Picard fallback at any stage that stalls.
pub(crate) fn solve(
    prob: &Problem<'_>,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<Solved, SolveError> {
    let target = Stage::final_stage(cfg);
    let guess = constant_guess(prob);
    let start = match warm {
        Some(w) if w.len() == prob.dofs && w.iter().all(|x| x.is_finite()) => w.to_vec(),
        _ => vec![guess; prob.dofs],
    };
    let direct = newton(prob, target, start, cfg);
    let mut total_iters = direct.iterations;
    if direct.converged {
        return Ok(Solved {
            u: direct.u,
            residual_sup: direct.residual_sup,
            newton_iters: total_iters,
            continuation_steps: 0,
        });
    }
    let mut history = direct.history.clone();
    let mut best = (direct.residual_sup, direct.u.clone());

    let mut stages = Vec::new();
    let mut eps = cfg.eps_start;
    while eps > cfg.eps_final * 1.000_001 {
        stages.push(Stage::continuation(eps, cfg));
        eps *= 0.1;
    }
    stages.push(target);

    let mut u = vec![guess; prob.dofs];
    for (i, &stage) in stages.iter().enumerate() {
        let mut run = newton(prob, stage, u.clone(), cfg);
        total_iters += run.iterations;
        if !run.converged {
            let relaxed = picard(prob, stage, run.u.clone(), cfg.picard_iters);
            run = newton(prob, stage, relaxed, cfg);
            total_iters += run.iterations;
        }
        history.extend_from_slice(&run.history);
        if stage == target && run.residual_sup < best.0 {
            best = (run.residual_sup, run.u.clone());
        }
        if !run.converged {
            return Err(SolveError::NewtonDiverged {
                best_residual: best.0,
                history,
                best_iterate: best.1,
            });
        }
        u = run.u;
        if i + 1 == stages.len() {
            return Ok(Solved {
                u,
                residual_sup: run.residual_sup,
                newton_iters: total_iters,
                continuation_steps: stages.len(),
            });
        }
    }
    unreachable!("continuation always ends with the target stage")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let main = vec![4.0, 5.0, 3.0, 6.0];
        let off = vec![-1.0, -2.0, -0.5];
        let rhs = vec![1.0, -2.0, 0.5, 3.0];
        let [x, _, _] = thomas3(&main, &off, [rhs.clone(), rhs.clone(), rhs.clone()]).unwrap();
        let mut m = DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = main[i];
            if i < 3 {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        let dense = m.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..4 {
            assert!((x[i] - dense[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn schur_solve_matches_dense_assembly() {
        let gamma = Nonlinearity::Identity;
        let loads: Vec<Vec<f64>> = vec![vec![0.0; 5], vec![0.0; 4], vec![0.0; 2]];
        let blocks = vec![
            EdgeBlock { cells: 4, h: 0.25, p: 2.0, gamma: &gamma, load: &loads[0], from: 0, to: 1 },
            EdgeBlock { cells: 3, h: 0.2, p: 2.0, gamma: &gamma, load: &loads[1], from: 1, to: 2 },
            EdgeBlock { cells: 1, h: 0.5, p: 2.0, gamma: &gamma, load: &loads[2], from: 2, to: 0 },
        ];
        let prob = Problem::new(blocks, 3, vec![0.0; 3], 1.3);
        let n = prob.dofs();
        let cond: Vec<Vec<f64>> = prob.blocks.iter().map(|b| (0..b.cells).map(|c| 1.0 + c as f64).collect()).collect();
        let diag: Vec<Vec<f64>> = prob.blocks.iter().map(|b| (0..=b.cells).map(|j| 0.1 + 0.05 * j as f64).collect()).collect();
        let parts = LinearParts { cond, diag };
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = solve_linear(&prob, &parts, &rhs).unwrap();
        // Dense oracle: build the matrix column by column via `apply`.
        let mut m = DMatrix::<f64>::zeros(n, n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let y = apply(&prob, &parts, &e);
            for row in 0..n {
                m[(row, col)] = y[row];
            }
        }
        let dense = m.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((x[i] - dense[i]).abs() < 1e-12, "{i}: {} vs {}", x[i], dense[i]);
        }
    }
}
