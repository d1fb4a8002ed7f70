//! How far entropic values sit from the unregularized one.
//!
//! The bounds evaluated here relate `F^{eps,delta}` (entropic) to `F^{0,0}`
//! (unregularized) through `eta = eps + lambda_bar * delta`:
//!
//! ```text
//! 0 <= F^{0,0} - F^{eps,delta} = O(d eta log(1 / eta))
//! ```

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::cost::{diameter, lipschitz_estimate, Norm, ReferenceCoupling};
use crate::dual::{primal_lp_unreg, solve_cost_reg, ProblemSpec};
use crate::entropic::{entropic_lagrangian, lambda_bar, solve_entropic, RegParams};
use crate::error::{Result, WdroError};
use crate::measures::{Coupling, Grid};

/// Number of radii probed by [`volume_constant`].
pub const VOLUME_RADII: usize = 64;
/// Midpoint cells used to integrate one ball intersection for l1/l2 in 2-D.
const QUADRATURE_CELLS: usize = 10_000;
/// Relative slack granted to the Lagrangian inequality.
pub const LAGRANGIAN_SLACK: f64 = 1e-3;
/// Tolerance on the sign of sweep gaps.
pub const GAP_TOL: f64 = 1e-8;

/// `vol(Xi ∩ B(center, r))` for the box `Xi`.
fn ball_intersection(bounds: &[(f64, f64)], center: &[f64], r: f64, norm: Norm) -> f64 {
    let clipped: Vec<(f64, f64)> = bounds
        .iter()
        .zip(center)
        .map(|(&(a, b), &x)| ((x - r).max(a), (x + r).min(b)))
        .collect();
    // per-axis lengths measured from the center avoid cancellation at small r
    let boxed: f64 = bounds
        .iter()
        .zip(center)
        .map(|(&(a, b), &x)| ((b - x).min(r) + (x - a).min(r)).max(0.0))
        .product();
    if bounds.len() == 1 || norm == Norm::Linf || boxed == 0.0 {
        return boxed;
    }
    // midpoint rule over the clipped bounding box of the ball
    let m = (QUADRATURE_CELLS as f64).sqrt() as usize;
    let (hx, hy) = ((clipped[0].1 - clipped[0].0) / m as f64, (clipped[1].1 - clipped[1].0) / m as f64);
    let mut inside = 0usize;
    let mut y = [0.0; 2];
    for a in 0..m {
        y[0] = clipped[0].0 + (a as f64 + 0.5) * hx;
        for b in 0..m {
            y[1] = clipped[1].0 + (b as f64 + 0.5) * hy;
            if norm.distance(&y, center) <= r {
                inside += 1;
            }
        }
    }
    inside as f64 * hx * hy
}

/// `V = inf_{x, 0 < r <= d} vol(Xi ∩ B(x, r)) / r^d` over grid points `x` and
/// `VOLUME_RADII` log-spaced radii ending at `r = d` (the dimension).
pub fn volume_constant(grid: &Grid, norm: Norm) -> f64 {
    let d = grid.dim() as f64;
    let radii: Vec<f64> = (0..VOLUME_RADII)
        .map(|k| d * 10f64.powf(-6.0 * (1.0 - k as f64 / (VOLUME_RADII - 1) as f64)))
        .collect();
    grid.points()
        .flat_map(|x| {
            radii
                .iter()
                .map(move |&r| ball_intersection(grid.bounds(), x, r, norm) / r.powf(d))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Continuum normalization `sigma^(d/p) ∫ exp(-||y||^p / 2^(p-1)) dy`.
pub fn continuum_normalizer(dim: usize, norm: Norm, p: f64, sigma: f64) -> f64 {
    let d = dim as f64;
    let a = 2f64.powf(p - 1.0);
    sigma.powf(d / p) * norm.unit_ball_volume(dim) * (d / p) * a.powf(d / p) * gamma(d / p)
}

/// Grid version of `I_sigma(x) = ∫ exp(-c(x, y) / (2^(p-1) sigma)) dy`:
/// point sum times cell volume.
pub fn grid_normalizer(prob: &ProblemSpec, sigma: f64, i: usize) -> f64 {
    let scale = prob.cost_spec().reference_scale() * sigma;
    prob.cost_row(i).iter().map(|c| (-c / scale).exp()).sum::<f64>() * prob.grid().cell_volume()
}

/// Restricts each row of `pi0`'s conditional to the points within
/// `delta_radius` of that row's target, renormalizes and scales by `P`. A row
/// whose restricted mass vanishes becomes a Dirac at its target.
pub fn block_approximation(targets: &[usize], pi0: &ReferenceCoupling, delta_radius: f64) -> Result<Coupling> {
    let grid = pi0.grid();
    let n = grid.len();
    if targets.len() != n {
        return Err(WdroError::LengthMismatch { expected: n, got: targets.len() });
    }
    if !(delta_radius > 0.0) {
        return Err(WdroError::param("delta_radius", format!("must be > 0, got {delta_radius}")));
    }
    let norm = pi0.spec().norm;
    let rows = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let center = grid.point(t);
            let mut row: Vec<f64> = pi0
                .conditional_row(i)
                .iter()
                .enumerate()
                .map(|(j, &w)| if norm.distance(grid.point(j), center) <= delta_radius { w } else { 0.0 })
                .collect();
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|w| *w /= total);
            } else {
                row.fill(0.0);
                row[t] = 1.0;
            }
            row
        })
        .collect();
    Ok(Coupling::from_conditionals(pi0.first_marginal(), rows))
}

/// Row maximizers of `f - (lam + beta / sigma) c`, the targets of the
/// block approximation.
pub fn lagrangian_targets(prob: &ProblemSpec, reg: &RegParams, lam: f64) -> Vec<usize> {
    let penalty = lam + reg.beta(lam) / reg.sigma;
    (0..prob.n()).map(|i| crate::dual::inner_max(prob, i, penalty).1).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LagrangianCheck {
    pub lambda: f64,
    pub delta_radius: f64,
    /// Cost-regularized Lagrangian with weights `eps / sigma`, `delta / sigma`.
    pub lhs: f64,
    /// Entropic Lagrangian plus the approximation terms.
    pub rhs: f64,
    pub entropic_lagrangian: f64,
    pub volume_constant: f64,
    pub holds: bool,
}

/// Evaluates both sides of
///
/// ```text
/// E_P max_y [f - (lam + beta / sigma) c]
///   <= F^{eps,delta}(lam) + (L(f) + lam L(c)) r + beta (r^p / sigma - log(V r^d) + E_P log I_sigma)
/// ```
///
/// where `F^{eps,delta}(lam)` is the entropic Lagrangian, `beta = eps + lam delta`
/// and `r = delta_radius`. `sigma` is taken from `pi0`.
pub fn lagrangian_gap_check(
    prob: &ProblemSpec,
    reg: &RegParams,
    pi0: &ReferenceCoupling,
    lam: f64,
    delta_radius: f64,
) -> Result<LagrangianCheck> {
    if !(delta_radius > 0.0) {
        return Err(WdroError::param("delta_radius", format!("must be > 0, got {delta_radius}")));
    }
    let sigma = pi0.sigma();
    let beta = reg.beta(lam);
    let grid = prob.grid();
    let d = grid.dim() as f64;
    let norm = prob.cost_spec().norm;
    let p = prob.cost_spec().p;
    let lhs = crate::dual::expected_inner_max(prob, lam + beta / sigma);
    let ent = entropic_lagrangian(prob, pi0, lam, beta)?;
    let lf = lipschitz_estimate(grid, prob.objective())?;
    let lc = prob.cost_spec().lipschitz_on(diameter(grid, norm));
    let v = volume_constant(grid, norm);
    let w = prob.distribution().weights();
    let log_i: f64 = (0..prob.n())
        .filter(|&i| w[i] > 0.0)
        .map(|i| w[i] * grid_normalizer(prob, sigma, i).ln())
        .sum();
    let r = delta_radius;
    let rhs = ent + (lf + lam * lc) * r + beta * (r.powf(p) / sigma - (v * r.powf(d)).ln() + log_i);
    Ok(LagrangianCheck {
        lambda: lam,
        delta_radius: r,
        lhs,
        rhs,
        entropic_lagrangian: ent,
        volume_constant: v,
        holds: lhs <= rhs + LAGRANGIAN_SLACK * (1.0 + rhs.abs()),
    })
}

/// Radius `(eps + lambda_bar delta) d / L` with `L = L(f) + lambda_bar L(c)`.
pub fn optimal_block_radius(prob: &ProblemSpec, reg: &RegParams, pi0: &ReferenceCoupling) -> Result<f64> {
    let bar = lambda_bar(prob, pi0)?;
    let grid = prob.grid();
    let big_l = lipschitz_estimate(grid, prob.objective())?
        + bar * prob.cost_spec().lipschitz_on(diameter(grid, prob.cost_spec().norm));
    if big_l <= 0.0 {
        return Err(WdroError::param("objective", "zero Lipschitz constant leaves the radius undefined"));
    }
    Ok(reg.beta(bar) * grid.dim() as f64 / big_l)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub delta: f64,
    pub lambda_star: f64,
    pub lambda_bar: f64,
    pub value_entropic: f64,
    pub value_unreg: f64,
    /// `value_unreg - value_entropic`.
    pub gap: f64,
    /// `eps + lambda_bar * delta`.
    pub eta: f64,
    /// `gap / (d eta log(1 / eta))`, for `eta < 1/e`.
    pub rate_ratio: Option<f64>,
    /// Lower bound on `value_entropic` with the continuum constants; `None`
    /// when the Lipschitz constant vanishes.
    pub extended_lower_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub dim: usize,
    pub sigma: f64,
    pub rows: Vec<SweepRow>,
    /// Largest `rate_ratio`; `None` when no row has `eta < 1/e`.
    pub c_fit: Option<f64>,
    pub all_gaps_nonnegative: bool,
}

impl SweepReport {
    /// Ratio of largest to smallest `rate_ratio` over rows with a positive one.
    pub fn rate_spread(&self) -> Option<f64> {
        let r: Vec<f64> = self.rows.iter().filter_map(|r| r.rate_ratio).filter(|&v| v > 0.0).collect();
        if r.is_empty() {
            return None;
        }
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(hi / lo)
    }
}

/// Solves every `(eps, delta)` pair of the Cartesian product, rows in input order.
pub fn sweep(prob: &ProblemSpec, pi0: &ReferenceCoupling, eps_list: &[f64], delta_list: &[f64]) -> Result<SweepReport> {
    let sigma = pi0.sigma();
    let bar = lambda_bar(prob, pi0)?;
    let unreg = solve_cost_reg(prob, 0.0, 0.0)?.value;
    let grid = prob.grid();
    let dim = grid.dim();
    let d = dim as f64;
    let norm = prob.cost_spec().norm;
    let p = prob.cost_spec().p;
    let v = volume_constant(grid, norm);
    let c_const = (grid.volume() / v)
        .ln()
        .min((continuum_normalizer(dim, norm, p, sigma) / v).ln());
    let big_l = lipschitz_estimate(grid, prob.objective())? + bar * prob.cost_spec().lipschitz_on(diameter(grid, norm));
    let pairs: Vec<(f64, f64)> = eps_list
        .iter()
        .flat_map(|&e| delta_list.iter().map(move |&dl| (e, dl)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(eps, delta)| -> Result<SweepRow> {
            let reg = RegParams::new(eps, delta, sigma)?;
            let sol = solve_entropic(prob, &reg, pi0)?;
            let eta = eps + bar * delta;
            let gap = unreg - sol.dual.value;
            let rate_ratio = (eta < (-1f64).exp()).then(|| gap / (d * eta * (1.0 / eta).ln()));
            let extended_lower_bound = if big_l > 0.0 {
                let shrunk = solve_cost_reg(&prob.with_rho(prob.rho() / (1.0 + delta / sigma))?, 0.0, 0.0)?.value;
                let loss = eta * (d + d * (big_l / (eta * d)).ln() + c_const + (eta * d / big_l).powf(p) / sigma);
                Some(shrunk - loss - eps * prob.rho() / (sigma + delta))
            } else {
                None
            };
            Ok(SweepRow {
                eps,
                delta,
                lambda_star: sol.dual.lambda_star,
                lambda_bar: bar,
                value_entropic: sol.dual.value,
                value_unreg: unreg,
                gap,
                eta,
                rate_ratio,
                extended_lower_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_fit = rows
        .iter()
        .filter_map(|r| r.rate_ratio)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let all_gaps_nonnegative = rows.iter().all(|r| r.gap >= -GAP_TOL);
    Ok(SweepReport {
        dim,
        sigma,
        rows,
        c_fit,
        all_gaps_nonnegative,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadiusComparison {
    pub f_rho: f64,
    pub f_shrunk: f64,
    /// `L(f) (t^p rho)^(1/p)` with `t = 1 - (1 + delta / sigma)^(-1/p)`.
    pub bound: f64,
    pub monotone: bool,
    pub bound_holds: bool,
}

/// Unregularized values at radii `rho` and `rho / (1 + delta / sigma)`, both
/// from the linear-programming primal.
pub fn radius_compare(prob: &ProblemSpec, delta: f64, sigma: f64) -> Result<RadiusComparison> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(WdroError::param("delta", format!("must be >= 0, got {delta}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(WdroError::param("sigma", format!("must be > 0, got {sigma}")));
    }
    let p = prob.cost_spec().p;
    let f_rho = primal_lp_unreg(prob)?.value;
    let f_shrunk = primal_lp_unreg(&prob.with_rho(prob.rho() / (1.0 + delta / sigma))?)?.value;
    let t = 1.0 - (1.0 + delta / sigma).powf(-1.0 / p);
    let lf = lipschitz_estimate(prob.grid(), prob.objective())?;
    let bound = lf * (t.powf(p) * prob.rho()).powf(1.0 / p);
    let diff = f_rho - f_shrunk;
    Ok(RadiusComparison {
        f_rho,
        f_shrunk,
        bound,
        monotone: diff >= -GAP_TOL,
        bound_holds: diff <= bound + GAP_TOL,
    })
}
