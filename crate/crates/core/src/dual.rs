//! Unregularized and cost-regularized WDRO on a grid.
//!
//! The cost-regularized problem
//!
//! ```text
//! sup { E_{pi_2} f - eps E_pi c : pi_1 = P, (1 + delta) E_pi c <= rho }
//! ```
//!
//! has the dual `inf_{lambda >= 0} lambda rho + E_P max_y [f(y) - (eps + (1 + delta) lambda) c(x, y)]`,
//! a convex piecewise-linear function of `lambda`. Taking `y = x` inside the
//! max gives `g(lambda) >= lambda rho + E_P f`, and `g(0) <= max f`, so every
//! minimizer lies in `[0, osc(f) / rho]`. The search runs on
//! `[0, osc(f) / rho + 1]`.

use std::sync::Arc;

use serde::Serialize;

use crate::cost::{cost_matrix, CostSpec};
use crate::error::{Result, WdroError};
use crate::lp::{LinearProgram, Relation};
use crate::measures::{Coupling, DiscreteMeasure, Grid};
use crate::par::map_rows;
use crate::scalar::golden_section;

pub const LAMBDA_TOL: f64 = 1e-9;

/// Largest grid accepted by [`primal_lp_unreg`].
pub const MAX_PRIMAL_LP_POINTS: usize = 64;

/// Objective values, reference distribution, cost and radius.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    p: DiscreteMeasure,
    f: Vec<f64>,
    cost: CostSpec,
    rho: f64,
    costs: Arc<Vec<f64>>,
}

impl ProblemSpec {
    pub fn new(p: DiscreteMeasure, f: Vec<f64>, cost: CostSpec, rho: f64) -> Result<Self> {
        if f.len() != p.len() {
            return Err(WdroError::LengthMismatch {
                expected: p.len(),
                got: f.len(),
            });
        }
        if let Some(k) = f.iter().position(|v| !v.is_finite()) {
            return Err(WdroError::param("f", format!("value at point {k} is not finite")));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(WdroError::param("rho", format!("must be > 0, got {rho}")));
        }
        let costs = Arc::new(cost_matrix(p.grid(), &cost));
        Ok(ProblemSpec {
            p,
            f,
            cost,
            rho,
            costs,
        })
    }

    /// Same problem with another radius.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(WdroError::param("rho", format!("must be > 0, got {rho}")));
        }
        Ok(ProblemSpec {
            rho,
            ..self.clone()
        })
    }

    /// Same problem with another objective.
    pub fn with_objective(&self, f: Vec<f64>) -> Result<Self> {
        ProblemSpec::new(self.p.clone(), f, self.cost, self.rho)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.p.grid()
    }

    pub fn distribution(&self) -> &DiscreteMeasure {
        &self.p
    }

    pub fn objective(&self) -> &[f64] {
        &self.f
    }

    pub fn cost_spec(&self) -> &CostSpec {
        &self.cost
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// Row `i` of the cost matrix, `c(x_i, .)`.
    pub fn cost_row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.costs[i * n..(i + 1) * n]
    }

    pub fn cost_matrix(&self) -> &[f64] {
        &self.costs
    }

    pub fn max_f(&self) -> f64 {
        self.f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_f(&self) -> f64 {
        self.f.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `max f - min f`.
    pub fn oscillation(&self) -> f64 {
        self.max_f() - self.min_f()
    }

    /// `sup |f|` over the grid.
    pub fn sup_abs(&self) -> f64 {
        self.f.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    pub lambda_star: f64,
    pub value: f64,
    /// Per source point, the grid index maximizing the inner problem at `lambda_star`.
    pub inner_argmax: Vec<usize>,
    /// Upper end of the search interval for `lambda`.
    pub lambda_bound: f64,
    /// Primal minus dual value, when a primal certificate is available.
    pub gap: Option<f64>,
    /// Optimality residual of an inner solver, when there is one.
    pub inner_residual: Option<f64>,
    pub evaluations: usize,
}

fn check_lambda(lam: f64) -> Result<()> {
    if !(lam.is_finite() && lam >= 0.0) {
        return Err(WdroError::param("lambda", format!("must be >= 0, got {lam}")));
    }
    Ok(())
}

fn check_reg(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(WdroError::param(name, format!("must be >= 0, got {v}")));
    }
    Ok(())
}

/// `max_y f(y) - penalty * c(x_i, y)`, smallest index on ties.
pub(crate) fn inner_max(prob: &ProblemSpec, i: usize, penalty: f64) -> (f64, usize) {
    let row = prob.cost_row(i);
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, (&fj, &c)) in prob.f.iter().zip(row).enumerate() {
        let v = fj - penalty * c;
        if v > best.0 {
            best = (v, j);
        }
    }
    best
}

/// Inner maximization `max_y f(y) - lam c(x, y)` at source point `x_index`.
pub fn inner_sup(prob: &ProblemSpec, x_index: usize, lam: f64) -> Result<(f64, usize)> {
    check_lambda(lam)?;
    if x_index >= prob.n() {
        return Err(WdroError::param("x_index", format!("{x_index} is off the grid")));
    }
    Ok(inner_max(prob, x_index, lam))
}

/// `E_P max_y [f(y) - penalty c(x, y)]`, rows summed in index order.
pub(crate) fn expected_inner_max(prob: &ProblemSpec, penalty: f64) -> f64 {
    let n = prob.n();
    let w = prob.p.weights();
    map_rows(n, n, |i| if w[i] > 0.0 { w[i] * inner_max(prob, i, penalty).0 } else { 0.0 })
        .into_iter()
        .sum()
}

/// Dual function of the cost-regularized problem at `lam`; `eps = delta = 0`
/// gives the unregularized dual.
pub fn dual_value_cost_reg(prob: &ProblemSpec, eps: f64, delta: f64, lam: f64) -> Result<f64> {
    check_reg("eps", eps)?;
    check_reg("delta", delta)?;
    check_lambda(lam)?;
    Ok(lam * prob.rho + expected_inner_max(prob, eps + (1.0 + delta) * lam))
}

/// Minimizes [`dual_value_cost_reg`] over `lambda` by golden-section search.
pub fn solve_cost_reg(prob: &ProblemSpec, eps: f64, delta: f64) -> Result<DualSolution> {
    check_reg("eps", eps)?;
    check_reg("delta", delta)?;
    let bound = prob.oscillation() / prob.rho + 1.0;
    let best = golden_section(
        |lam| lam * prob.rho + expected_inner_max(prob, eps + (1.0 + delta) * lam),
        0.0,
        bound,
        LAMBDA_TOL,
    );
    let penalty = eps + (1.0 + delta) * best.x;
    let inner_argmax = (0..prob.n()).map(|i| inner_max(prob, i, penalty).1).collect();
    Ok(DualSolution {
        lambda_star: best.x,
        value: best.value,
        inner_argmax,
        lambda_bound: bound,
        gap: None,
        inner_residual: None,
        evaluations: best.evaluations,
    })
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub value: f64,
    pub coupling: Coupling,
}

/// Brute-force primal: `max E_{pi_2} f` over couplings with first marginal
/// `P` and `E_pi c <= rho`, as a linear program.
pub fn primal_lp_unreg(prob: &ProblemSpec) -> Result<PrimalSolution> {
    let n = prob.n();
    if n > MAX_PRIMAL_LP_POINTS {
        return Err(WdroError::SupportTooLarge {
            size: n,
            cap: MAX_PRIMAL_LP_POINTS,
        });
    }
    let support = prob.p.support();
    let nv = support.len() * n;
    let objective: Vec<f64> = support.iter().flat_map(|_| prob.f.iter().cloned()).collect();
    let mut lp = LinearProgram::new(objective);
    for (k, &i) in support.iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[k * n..(k + 1) * n].fill(1.0);
        lp.push(row, Relation::Eq, prob.p.weights()[i]);
    }
    let budget: Vec<f64> = support
        .iter()
        .flat_map(|&i| prob.cost_row(i).iter().cloned())
        .collect();
    lp.push(budget, Relation::Le, prob.rho);
    let sol = lp.maximize()?;
    let mut weights = vec![0.0; n * n];
    for (k, &i) in support.iter().enumerate() {
        weights[i * n..(i + 1) * n].copy_from_slice(&sol.x[k * n..(k + 1) * n]);
    }
    let coupling = Coupling::new(prob.grid().clone(), weights)?;
    let value = coupling.marginal(crate::measures::Axis::Second).expectation(&prob.f)?;
    Ok(PrimalSolution { value, coupling })
}
