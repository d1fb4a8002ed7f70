//! Exact and entropic optimal transport between two measures on one grid.
//!
//! These solvers are cross-checks for the coupling machinery, not
//! production OT: the exact solver is a dense LP capped at
//! [`MAX_ORACLE_ATOMS`] atoms per side.

use serde::Serialize;

use crate::cost::{cost_matrix, CostSpec};
use crate::error::{Result, WdroError};
use crate::lp::{LinearProgram, Relation};
use crate::measures::{kl_divergence, Coupling, DiscreteMeasure};
use crate::softmax::log_sum_exp;

pub const MAX_ORACLE_ATOMS: usize = 64;

pub const SINKHORN_TOL: f64 = 1e-9;
pub const SINKHORN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct OtResult {
    pub value: f64,
    pub coupling: Coupling,
    pub iterations: usize,
    pub converged: bool,
    /// Total-variation violation of the marginals (max of the two sides).
    pub marginal_error: f64,
    /// Target-side potential on the grid (zero off the support of `Q`).
    /// Empty for the exact solver.
    pub potential: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OtSummary {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

impl OtResult {
    pub fn summary(&self) -> OtSummary {
        OtSummary {
            value: self.value,
            iterations: self.iterations,
            converged: self.converged,
            marginal_error: self.marginal_error,
        }
    }
}

fn same_grid(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<()> {
    if p.grid() != q.grid() {
        return Err(WdroError::GridMismatch);
    }
    Ok(())
}

fn marginal_tv(coupling: &[f64], n: usize, p: &[f64], q: &[f64]) -> f64 {
    let mut rows = 0.0;
    let mut cols = vec![0.0; n];
    for i in 0..n {
        let mut r = 0.0;
        for j in 0..n {
            let w = coupling[i * n + j];
            r += w;
            cols[j] += w;
        }
        rows += (r - p[i]).abs();
    }
    let cols: f64 = cols.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    0.5 * rows.max(cols)
}

/// Exact `W_c(P, Q)` by linear programming over the transport polytope.
pub fn wasserstein_exact(p: &DiscreteMeasure, q: &DiscreteMeasure, spec: &CostSpec) -> Result<OtResult> {
    same_grid(p, q)?;
    let grid = p.grid();
    let n = grid.len();
    let sp = p.support();
    let sq = q.support();
    let size = sp.len().max(sq.len());
    if size > MAX_ORACLE_ATOMS {
        return Err(WdroError::SupportTooLarge {
            size,
            cap: MAX_ORACLE_ATOMS,
        });
    }
    let cost = cost_matrix(grid, spec);
    let nv = sp.len() * sq.len();
    let objective: Vec<f64> = sp
        .iter()
        .flat_map(|&a| sq.iter().map(move |&b| (a, b)))
        .map(|(a, b)| -cost[a * n + b])
        .collect();
    let mut lp = LinearProgram::new(objective);
    for (ka, &a) in sp.iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[ka * sq.len()..(ka + 1) * sq.len()].fill(1.0);
        lp.push(row, Relation::Eq, p.weights()[a]);
    }
    for (kb, &b) in sq.iter().enumerate() {
        let mut row = vec![0.0; nv];
        for ka in 0..sp.len() {
            row[ka * sq.len() + kb] = 1.0;
        }
        lp.push(row, Relation::Eq, q.weights()[b]);
    }
    let sol = lp.maximize()?;
    let mut weights = vec![0.0; n * n];
    for (ka, &a) in sp.iter().enumerate() {
        for (kb, &b) in sq.iter().enumerate() {
            weights[a * n + b] = sol.x[ka * sq.len() + kb];
        }
    }
    let marginal_error = marginal_tv(&weights, n, p.weights(), q.weights());
    let value = weights.iter().zip(&cost).map(|(w, c)| w * c).sum();
    Ok(OtResult {
        value,
        coupling: Coupling::new(grid.clone(), weights)?,
        iterations: sol.pivots,
        converged: true,
        marginal_error,
        potential: Vec::new(),
    })
}

/// Log-domain Sinkhorn for `min E_pi c + eps KL(pi | P ⊗ Q)`.
///
/// Iterates until both marginal violations are at most [`SINKHORN_TOL`] in
/// total variation or [`SINKHORN_MAX_ITER`] sweeps have run; in the latter
/// case `converged` is false.
pub fn sinkhorn(p: &DiscreteMeasure, q: &DiscreteMeasure, spec: &CostSpec, eps: f64) -> Result<OtResult> {
    same_grid(p, q)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(WdroError::param("eps", format!("must be > 0, got {eps}")));
    }
    let grid = p.grid();
    let n = grid.len();
    let sp = p.support();
    let sq = q.support();
    let cost = cost_matrix(grid, spec);
    let log_p: Vec<f64> = sp.iter().map(|&a| p.weights()[a].ln()).collect();
    let log_q: Vec<f64> = sq.iter().map(|&b| q.weights()[b].ln()).collect();
    let mut f = vec![0.0; sp.len()];
    let mut g = vec![0.0; sq.len()];
    let mut scratch = Vec::with_capacity(sp.len().max(sq.len()));
    let mut plan = vec![0.0; n * n];
    let mut iterations = 0;
    let mut err = f64::INFINITY;

    while iterations < SINKHORN_MAX_ITER {
        iterations += 1;
        for (ka, &a) in sp.iter().enumerate() {
            scratch.clear();
            scratch.extend(sq.iter().enumerate().map(|(kb, &b)| log_q[kb] + (g[kb] - cost[a * n + b]) / eps));
            f[ka] = -eps * log_sum_exp(&scratch);
        }
        for (kb, &b) in sq.iter().enumerate() {
            scratch.clear();
            scratch.extend(sp.iter().enumerate().map(|(ka, &a)| log_p[ka] + (f[ka] - cost[a * n + b]) / eps));
            g[kb] = -eps * log_sum_exp(&scratch);
        }
        for (ka, &a) in sp.iter().enumerate() {
            for (kb, &b) in sq.iter().enumerate() {
                plan[a * n + b] = (log_p[ka] + log_q[kb] + (f[ka] + g[kb] - cost[a * n + b]) / eps).exp();
            }
        }
        err = marginal_tv(&plan, n, p.weights(), q.weights());
        if err <= SINKHORN_TOL {
            break;
        }
    }

    let coupling = Coupling::new(grid.clone(), plan)?;
    let transport: f64 = coupling.expectation(&cost)?;
    let kl = kl_divergence(&coupling, &Coupling::product(p, q)?)?;
    let mut potential = vec![0.0; n];
    for (kb, &b) in sq.iter().enumerate() {
        potential[b] = g[kb];
    }
    Ok(OtResult {
        value: transport + eps * kl,
        coupling,
        iterations,
        converged: err <= SINKHORN_TOL,
        marginal_error: err,
        potential,
    })
}

/// Semi-dual objective `E_Q v - eps E_{x~P} log E_{y~Q} exp((v(y) - c(x, y)) / eps)`
/// for a target-side potential `v` given on the grid.
///
/// Every `v` gives a lower bound on the Sinkhorn primal value, with equality
/// at the optimal potential. Adding a constant to `v` leaves it unchanged.
pub fn sinkhorn_dual_value(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    spec: &CostSpec,
    eps: f64,
    potential: &[f64],
) -> Result<f64> {
    same_grid(p, q)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(WdroError::param("eps", format!("must be > 0, got {eps}")));
    }
    let grid = p.grid();
    let n = grid.len();
    if potential.len() != n {
        return Err(WdroError::LengthMismatch {
            expected: n,
            got: potential.len(),
        });
    }
    let sq = q.support();
    let mut value: f64 = sq.iter().map(|&b| q.weights()[b] * potential[b]).sum();
    let mut scratch = Vec::with_capacity(sq.len());
    for a in p.support() {
        scratch.clear();
        scratch.extend(sq.iter().map(|&b| {
            q.weights()[b].ln() + (potential[b] - spec.eval(grid.point(a), grid.point(b))) / eps
        }));
        value -= p.weights()[a] * eps * log_sum_exp(&scratch);
    }
    Ok(value)
}
