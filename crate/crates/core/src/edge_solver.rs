//! Single-edge problem `α γ(u) − (ρ_p(u'))' = g` on `(0, ℓ)` with
//! `−ρ_p(u')(0) = a` and `ρ_p(u')(ℓ) = b`.

use crate::grid_functions::node_weight;
use crate::newton::{self, EdgeBlock, Problem, SolveError, SolverConfig, Stage};
use crate::nonlinearity::{FluxLaw, Nonlinearity};

/// Discrete single-edge boundary value problem on a uniform grid with
/// `g.len() − 1` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBvp {
    pub length: f64,
    pub p: f64,
    pub gamma: Nonlinearity,
    /// Nodal load.
    pub g: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl EdgeBvp {
    /// Problem with zero boundary fluxes and `α = 1`.
    pub fn new(length: f64, p: f64, gamma: Nonlinearity, g: Vec<f64>) -> Self {
        Self {
            length,
            p,
            gamma,
            g,
            a: 0.0,
            b: 0.0,
            alpha: 1.0,
        }
    }

    /// Samples `g` at the `cells + 1` nodes.
    pub fn from_fn(
        length: f64,
        p: f64,
        gamma: Nonlinearity,
        cells: usize,
        g: impl Fn(f64) -> f64,
    ) -> Self {
        let load = (0..=cells)
            .map(|j| g(crate::grid_functions::node_position(length, cells, j)))
            .collect();
        Self::new(length, p, gamma, load)
    }

    pub fn with_fluxes(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn cells(&self) -> usize {
        self.g.len().saturating_sub(1)
    }

    pub fn h(&self) -> f64 {
        self.length / self.cells() as f64
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.g.len() < 2 {
            return Err(SolveError::ShapeMismatch {
                expected: 2,
                found: self.g.len(),
            });
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(SolveError::InvalidProblem(format!("length {}", self.length)));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(SolveError::InvalidProblem(format!("exponent p = {}", self.p)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(SolveError::InvalidProblem(format!("alpha = {}", self.alpha)));
        }
        Ok(())
    }

    pub(crate) fn block(&self) -> EdgeBlock<'_> {
        EdgeBlock {
            cells: self.cells(),
            h: self.h(),
            p: self.p,
            gamma: &self.gamma,
            load: &self.g,
            from: 0,
            to: 1,
        }
    }

    fn problem(&self) -> Problem<'_> {
        Problem::new(vec![self.block()], 2, vec![self.a, self.b], self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSolution {
    pub u: Vec<f64>,
    /// `γ(u)` at the nodes.
    pub v: Vec<f64>,
    /// Cell fluxes `ρ_p(u')`.
    pub z: Vec<f64>,
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub continuation_steps: usize,
}

impl EdgeSolution {
    pub fn left(&self) -> f64 {
        self.u[0]
    }

    pub fn right(&self) -> f64 {
        self.u[self.u.len() - 1]
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// Entry `(j, j + 1)`, equal to `(j + 1, j)`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|j| {
                let mut y = self.diag[j] * x[j];
                if j > 0 {
                    y += self.off[j - 1] * x[j - 1];
                }
                if j + 1 < n {
                    y += self.off[j] * x[j + 1];
                }
                y
            })
            .collect()
    }
}

fn check_len(bvp: &EdgeBvp, u: &[f64]) -> Result<(), SolveError> {
    bvp.validate()?;
    if u.len() != bvp.g.len() {
        return Err(SolveError::ShapeMismatch {
            expected: bvp.g.len(),
            found: u.len(),
        });
    }
    Ok(())
}

fn rows(bvp: &EdgeBvp, stage: Stage, u: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; u.len()];
    newton::edge_rows(&bvp.block(), bvp.alpha, stage, u, &mut r);
    let n = u.len() - 1;
    r[0] -= bvp.a;
    r[n] -= bvp.b;
    r
}

/// Residual of the lumped weak form with the unregularised flux law:
/// row `j` is `α m_j γ(u_j) + ρ(δ_j) − ρ(δ_{j+1}) − m_j g_j`, minus `a` in
/// the first row and `b` in the last.
pub fn assemble_edge_residual(bvp: &EdgeBvp, u: &[f64]) -> Result<Vec<f64>, SolveError> {
    check_len(bvp, u)?;
    let exact = Stage {
        eps_rho: 0.0,
        eps_gamma: 0.0,
        clamp: 0.0,
    };
    Ok(rows(bvp, exact, u))
}

/// Residual and Jacobian for the flux law regularised with `eps`; `γ'` is
/// clamped to `[eps, 1/eps]`.
pub fn assemble_edge_system(
    bvp: &EdgeBvp,
    u: &[f64],
    eps: f64,
) -> Result<(Vec<f64>, Tridiagonal), SolveError> {
    check_len(bvp, u)?;
    let stage = Stage {
        eps_rho: eps,
        eps_gamma: 0.0,
        clamp: eps,
    };
    let n = u.len() - 1;
    let mut cond = vec![0.0; n];
    let mut d = vec![0.0; n + 1];
    // Regularised residual consistent with the Jacobian below.
    let law = FluxLaw::new(bvp.p, eps);
    let mut r = vec![0.0; n + 1];
    for j in 0..=n {
        let m = node_weight(bvp.h(), n, j);
        r[j] = bvp.alpha * m * bvp.gamma.eval(u[j]) - m * bvp.g[j];
    }
    for c in 1..=n {
        let flux = law.rho((u[c] - u[c - 1]) / bvp.h());
        r[c] += flux;
        r[c - 1] -= flux;
    }
    r[0] -= bvp.a;
    r[n] -= bvp.b;
    newton::edge_jacobian_with(&bvp.block(), bvp.alpha, stage, law, u, &mut cond, &mut d);
    let mut diag = d;
    let mut off = vec![0.0; n];
    for c in 0..n {
        diag[c] += cond[c];
        diag[c + 1] += cond[c];
        off[c] = -cond[c];
    }
    Ok((r, Tridiagonal { diag, off }))
}

/// Solves the edge problem by regularised damped Newton.
pub fn solve_edge_bvp(bvp: &EdgeBvp, cfg: &SolverConfig) -> Result<EdgeSolution, SolveError> {
    solve_edge_bvp_from(bvp, cfg, None)
}

/// As [`solve_edge_bvp`], starting Newton from `warm` when given.
pub fn solve_edge_bvp_from(
    bvp: &EdgeBvp,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<EdgeSolution, SolveError> {
    bvp.validate()?;
    let prob = bvp.problem();
    let warm_dofs = warm.filter(|w| w.len() == bvp.g.len()).map(nodes_to_dofs);
    let solved = newton::solve(&prob, cfg, warm_dofs.as_deref())?;
    let u = dofs_to_nodes(&solved.u);
    Ok(finish(bvp, u, &solved))
}

fn nodes_to_dofs(u: &[f64]) -> Vec<f64> {
    let n = u.len() - 1;
    let mut d = Vec::with_capacity(u.len());
    d.push(u[0]);
    d.push(u[n]);
    d.extend_from_slice(&u[1..n]);
    d
}

fn dofs_to_nodes(d: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(d.len());
    u.push(d[0]);
    u.extend_from_slice(&d[2..]);
    u.push(d[1]);
    u
}

fn finish(bvp: &EdgeBvp, u: Vec<f64>, solved: &newton::Solved) -> EdgeSolution {
    let h = bvp.h();
    let law = FluxLaw::exact(bvp.p);
    let v = u.iter().map(|&x| bvp.gamma.eval(x)).collect();
    let z = u.windows(2).map(|w| law.rho((w[1] - w[0]) / h)).collect();
    EdgeSolution {
        u,
        v,
        z,
        residual_sup: solved.residual_sup,
        newton_iters: solved.newton_iters,
        continuation_steps: solved.continuation_steps,
    }
}

/// Endpoint traces `(u(0), u(ℓ))` of the solution.
pub fn endpoint_map(bvp: &EdgeBvp, cfg: &SolverConfig) -> Result<(f64, f64), SolveError> {
    let sol = solve_edge_bvp(bvp, cfg)?;
    Ok((sol.left(), sol.right()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Flux perturbation `ε` added to `a` (left) or `b` (right) such that the
/// solution's value at that endpoint equals `target`.
pub fn flux_shoot(
    bvp: &EdgeBvp,
    side: Side,
    target: f64,
    cfg: &SolverConfig,
) -> Result<f64, SolveError> {
    bvp.validate()?;
    let mut trial = bvp.clone();
    let mut warm: Option<Vec<f64>> = None;
    let root = find_increasing_root(
        |eps| {
            match side {
                Side::Left => trial.a = bvp.a + eps,
                Side::Right => trial.b = bvp.b + eps,
            }
            let sol = solve_edge_bvp_from(&trial, cfg, warm.as_deref())?;
            let value = match side {
                Side::Left => sol.left(),
                Side::Right => sol.right(),
            };
            warm = Some(sol.u);
            Ok((value - target, ()))
        },
        0.0,
        1.0,
        cfg.match_tol,
        cfg,
    )?;
    Ok(root.x)
}

#[derive(Debug, Clone)]
pub(crate) struct Root<S> {
    pub x: f64,
    pub phi: f64,
    pub state: S,
}

/// Root of a continuous nondecreasing function: bracket doubling from
/// `center ± step`, then regula falsi with the Illinois modification and
/// periodic bisection. Stops when `|φ| ≤ tol` or the bracket is narrower
/// than `cfg.bracket_width`; returns the best point seen.
pub(crate) fn find_increasing_root<S>(
    mut f: impl FnMut(f64) -> Result<(f64, S), SolveError>,
    center: f64,
    step: f64,
    tol: f64,
    cfg: &SolverConfig,
) -> Result<Root<S>, SolveError> {
    let mut eval = |x: f64, best: &mut Option<Root<S>>| -> Result<f64, SolveError> {
        let (phi, state) = f(x)?;
        if best.as_ref().is_none_or(|b| phi.abs() < b.phi.abs()) {
            *best = Some(Root { x, phi, state });
        }
        Ok(phi)
    };
    let mut best: Option<Root<S>> = None;
    let done = |best: &Option<Root<S>>| best.as_ref().is_some_and(|b| b.phi.abs() <= tol);

    let f0 = eval(center, &mut best)?;
    if done(&best) {
        return Ok(best.unwrap());
    }
    let (mut lo, mut flo, mut hi, mut fhi);
    let mut step = step;
    let mut doublings = 0;
    if f0 > 0.0 {
        hi = center;
        fhi = f0;
        lo = center - step;
        flo = eval(lo, &mut best)?;
        while flo > 0.0 {
            if done(&best) {
                return Ok(best.unwrap());
            }
            doublings += 1;
            if doublings > cfg.max_doublings {
                return Err(SolveError::BracketNotFound(cfg.max_doublings));
            }
            hi = lo;
            fhi = flo;
            step *= 2.0;
            lo = center - step;
            flo = eval(lo, &mut best)?;
        }
    } else {
        lo = center;
        flo = f0;
        hi = center + step;
        fhi = eval(hi, &mut best)?;
        while fhi < 0.0 {
            if done(&best) {
                return Ok(best.unwrap());
            }
            doublings += 1;
            if doublings > cfg.max_doublings {
                return Err(SolveError::BracketNotFound(cfg.max_doublings));
            }
            lo = hi;
            flo = fhi;
            step *= 2.0;
            hi = center + step;
            fhi = eval(hi, &mut best)?;
        }
    }
    // Weighted values for the Illinois update.
    let (mut wlo, mut whi) = (flo, fhi);
    let mut last_side = 0i8;
    for it in 0..cfg.max_bracket_iters {
        if done(&best) || hi - lo <= cfg.bracket_width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let mut x = if it % 4 == 3 || whi == wlo {
            mid
        } else {
            (lo * whi - hi * wlo) / (whi - wlo)
        };
        if !(x > lo && x < hi) {
            x = mid;
        }
        if !(x > lo && x < hi) {
            break;
        }
        let fx = eval(x, &mut best)?;
        if fx == 0.0 {
            break;
        }
        if fx < 0.0 {
            lo = x;
            wlo = fx;
            if last_side == -1 {
                whi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            whi = fx;
            if last_side == 1 {
                wlo *= 0.5;
            }
            last_side = 1;
        }
    }
    Ok(best.expect("at least one evaluation"))
}
