//! Entropy-regularized WDRO.
//!
//! With `beta = eps + lambda * delta`, the dual function is
//!
//! ```text
//! D(lambda) = lambda rho + beta E_{x~P} log E_{y~pi0(.|x)} exp((f(y) - lambda c(x, y)) / beta)
//! ```
//!
//! which is convex in `lambda` and minimized on `[0, lambda_bar]` with
//! `lambda_bar = 2 sup|f| / (rho - E_{pi0} c)`. The optimal coupling is the
//! row-wise exponential tilt of `pi0` by `(f - lambda* c) / beta*`.
//!
//! Below `beta = 1e-12` the smoothed maximum is replaced by its limit, the
//! largest value over the support of `pi0(.|x)`.

use serde::{Deserialize, Serialize};

use crate::cost::{expected_cost, ReferenceCoupling};
use crate::dual::{DualSolution, ProblemSpec};
use crate::error::{Result, WdroError};
use crate::measures::{kl_divergence, Axis, Coupling};
use crate::par::map_rows;
use crate::scalar::golden_section;
use crate::softmax::{soft_max, tilt, weighted_max};

pub const BETA_FLOOR: f64 = 1e-12;
pub const LAMBDA_TOL: f64 = 1e-10;
/// Tolerance on feasibility slack and duality gap sign.
pub const CERT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegParams {
    /// Weight of `KL(pi | pi0)` in the objective.
    pub eps: f64,
    /// Weight of `KL(pi | pi0)` in the budget constraint.
    pub delta: f64,
    /// Width of the reference coupling.
    pub sigma: f64,
}

impl RegParams {
    pub fn new(eps: f64, delta: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("eps", eps), ("delta", delta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(WdroError::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(WdroError::param("sigma", format!("must be > 0, got {sigma}")));
        }
        if eps + delta <= 0.0 {
            return Err(WdroError::Config(
                "entropic solves need eps + delta > 0; use the cost-regularized solver".into(),
            ));
        }
        Ok(RegParams { eps, delta, sigma })
    }

    pub fn beta(&self, lam: f64) -> f64 {
        self.eps + lam * self.delta
    }
}

fn check_reference(prob: &ProblemSpec, pi0: &ReferenceCoupling) -> Result<()> {
    if pi0.grid() != prob.grid() {
        return Err(WdroError::GridMismatch);
    }
    if pi0.first_marginal().weights() != prob.distribution().weights() {
        return Err(WdroError::InvalidMeasure(
            "reference coupling's first marginal differs from P".into(),
        ));
    }
    Ok(())
}

fn shifted_row(prob: &ProblemSpec, i: usize, lam: f64) -> Vec<f64> {
    prob.objective()
        .iter()
        .zip(prob.cost_row(i))
        .map(|(f, c)| f - lam * c)
        .collect()
}

/// `E_P` of the per-row smoothed maximum of `f - lam c` under `pi0(.|x)`.
fn smoothed_expectation(prob: &ProblemSpec, pi0: &ReferenceCoupling, lam: f64, beta: f64) -> f64 {
    let n = prob.n();
    let w = prob.distribution().weights();
    map_rows(n, n, |i| {
        if w[i] == 0.0 {
            return 0.0;
        }
        let h = shifted_row(prob, i, lam);
        let cond = pi0.conditional_row(i);
        let v = if beta < BETA_FLOOR {
            weighted_max(cond, &h).map(|(m, _)| m).unwrap_or(f64::NEG_INFINITY)
        } else {
            soft_max(cond, &h, beta)
        };
        w[i] * v
    })
    .into_iter()
    .sum()
}

/// Entropic Lagrangian `sup_{pi_1 = P} E_pi [f - lam c] - beta KL(pi | pi0)`.
pub fn entropic_lagrangian(prob: &ProblemSpec, pi0: &ReferenceCoupling, lam: f64, beta: f64) -> Result<f64> {
    check_reference(prob, pi0)?;
    Ok(smoothed_expectation(prob, pi0, lam, beta))
}

pub fn entropic_dual_value(prob: &ProblemSpec, reg: &RegParams, pi0: &ReferenceCoupling, lam: f64) -> Result<f64> {
    check_reference(prob, pi0)?;
    if !(lam.is_finite() && lam >= 0.0) {
        return Err(WdroError::param("lambda", format!("must be >= 0, got {lam}")));
    }
    if reg.eps + reg.delta <= 0.0 {
        return Err(WdroError::Config(
            "eps + delta = 0: use the cost-regularized solver".into(),
        ));
    }
    Ok(lam * prob.rho() + smoothed_expectation(prob, pi0, lam, reg.beta(lam)))
}

/// `2 sup|f| / (rho - E_{pi0} c)`; requires `E_{pi0} c < rho`.
pub fn lambda_bar(prob: &ProblemSpec, pi0: &ReferenceCoupling) -> Result<f64> {
    check_reference(prob, pi0)?;
    let e0 = pi0.expected_cost();
    if e0 >= prob.rho() {
        return Err(WdroError::Infeasible(format!(
            "E_{{pi0}} c = {e0} >= rho = {}: decrease sigma",
            prob.rho()
        )));
    }
    Ok(2.0 * prob.sup_abs() / (prob.rho() - e0))
}

/// Optimal coupling for a given `lambda_star`: row `i` is `pi0(.|x_i)` tilted
/// by `exp((f - lambda_star c(x_i, .)) / beta*)`, renormalized and scaled by `P_i`.
pub fn recover_primal(
    prob: &ProblemSpec,
    reg: &RegParams,
    pi0: &ReferenceCoupling,
    lambda_star: f64,
) -> Result<Coupling> {
    check_reference(prob, pi0)?;
    let beta = reg.beta(lambda_star);
    if !(beta > 0.0) {
        return Err(WdroError::DegenerateTilt);
    }
    let n = prob.n();
    let rows = map_rows(n, n, |i| tilt(pi0.conditional_row(i), &shifted_row(prob, i, lambda_star), beta));
    Ok(Coupling::from_conditionals(prob.distribution(), rows))
}

/// Limit of [`recover_primal`] as `beta -> 0`: each row is a Dirac at its
/// best supported point.
fn hard_max_coupling(prob: &ProblemSpec, pi0: &ReferenceCoupling, lam: f64) -> Coupling {
    let n = prob.n();
    let rows = (0..n)
        .map(|i| {
            let (_, j) = weighted_max(pi0.conditional_row(i), &shifted_row(prob, i, lam))
                .expect("reference rows have positive mass on the diagonal");
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            row
        })
        .collect();
    Coupling::from_conditionals(prob.distribution(), rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualityCertificate {
    pub dual_value: f64,
    /// `E_{pi_2} f - eps KL(pi | pi0)`.
    pub primal_value: f64,
    /// Dual minus primal value.
    pub gap: f64,
    /// `rho - E_pi c - delta KL(pi | pi0)`.
    pub slack: f64,
    pub kl: f64,
    /// `lambda * |slack|`.
    pub complementarity: f64,
}

impl DualityCertificate {
    /// Strong duality and complementary slackness at the given tolerances.
    pub fn holds(&self, gap_rel: f64, slack_tol: f64, compl_tol: f64) -> bool {
        self.gap.abs() <= gap_rel * (1.0 + self.dual_value.abs())
            && self.slack >= -slack_tol
            && self.complementarity <= compl_tol
    }
}

pub fn verify_duality(
    prob: &ProblemSpec,
    reg: &RegParams,
    pi0: &ReferenceCoupling,
    lambda_star: f64,
    coupling: &Coupling,
) -> Result<DualityCertificate> {
    let dual_value = entropic_dual_value(prob, reg, pi0, lambda_star)?;
    let kl = kl_divergence(coupling, pi0.coupling())?;
    let ef = coupling.marginal(Axis::Second).expectation(prob.objective())?;
    let primal_value = ef - reg.eps * kl;
    let slack = prob.rho() - expected_cost(coupling, prob.cost_spec()) - reg.delta * kl;
    Ok(DualityCertificate {
        dual_value,
        primal_value,
        gap: dual_value - primal_value,
        slack,
        kl,
        complementarity: lambda_star * slack.abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropicSolution {
    pub dual: DualSolution,
    #[serde(skip)]
    pub primal_coupling: Coupling,
    pub primal_value: f64,
    pub feasibility_slack: f64,
    pub duality_gap: f64,
    pub certificate: DualityCertificate,
}

fn coupling_at(prob: &ProblemSpec, reg: &RegParams, pi0: &ReferenceCoupling, lam: f64) -> Result<Coupling> {
    if reg.beta(lam) < BETA_FLOOR {
        Ok(hard_max_coupling(prob, pi0, lam))
    } else {
        recover_primal(prob, reg, pi0, lam)
    }
}

fn slack_of(prob: &ProblemSpec, reg: &RegParams, pi0: &ReferenceCoupling, coupling: &Coupling) -> Result<f64> {
    let kl = kl_divergence(coupling, pi0.coupling())?;
    Ok(prob.rho() - expected_cost(coupling, prob.cost_spec()) - reg.delta * kl)
}

/// The slack of the tilted coupling is `D'(lambda)`, nondecreasing in
/// `lambda`. Golden section locates `lambda*` only to about the square root of
/// machine precision, so a negative slack is removed by bisecting on its sign
/// over `[lambda, bound]` and keeping the feasible end.
fn restore_feasibility(
    prob: &ProblemSpec,
    reg: &RegParams,
    pi0: &ReferenceCoupling,
    lam: f64,
    bound: f64,
) -> Result<(f64, Coupling)> {
    const STEPS: usize = 200;
    let coupling = coupling_at(prob, reg, pi0, lam)?;
    if slack_of(prob, reg, pi0, &coupling)? >= 0.0 {
        return Ok((lam, coupling));
    }
    let mut lo = lam;
    let mut step = LAMBDA_TOL.max(lam * f64::EPSILON);
    let (mut hi, mut hi_coupling) = loop {
        let hi = (lam + step).min(bound);
        let c = coupling_at(prob, reg, pi0, hi)?;
        if slack_of(prob, reg, pi0, &c)? >= 0.0 || hi >= bound {
            break (hi, c);
        }
        lo = hi;
        step *= 2.0;
    };
    for _ in 0..STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = coupling_at(prob, reg, pi0, mid)?;
        if slack_of(prob, reg, pi0, &c)? >= 0.0 {
            hi = mid;
            hi_coupling = c;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_coupling))
}

/// Golden-section minimization of [`entropic_dual_value`] over
/// `[0, lambda_bar]`, followed by primal recovery and a duality certificate.
/// When the recovered coupling violates the budget, `lambda*` is moved right
/// until it does not.
pub fn solve_entropic(prob: &ProblemSpec, reg: &RegParams, pi0: &ReferenceCoupling) -> Result<EntropicSolution> {
    let bound = lambda_bar(prob, pi0)?;
    if reg.eps + reg.delta <= 0.0 {
        return Err(WdroError::Config(
            "eps + delta = 0: use the cost-regularized solver".into(),
        ));
    }
    let best = golden_section(
        |lam| lam * prob.rho() + smoothed_expectation(prob, pi0, lam, reg.beta(lam)),
        0.0,
        bound,
        LAMBDA_TOL,
    );
    let (lambda_star, coupling) = restore_feasibility(prob, reg, pi0, best.x, bound)?;
    let value = if lambda_star == best.x {
        best.value
    } else {
        lambda_star * prob.rho() + smoothed_expectation(prob, pi0, lambda_star, reg.beta(lambda_star))
    };
    let certificate = verify_duality(prob, reg, pi0, lambda_star, &coupling)?;
    let inner_argmax = (0..prob.n())
        .map(|i| {
            weighted_max(pi0.conditional_row(i), &shifted_row(prob, i, lambda_star))
                .map(|(_, j)| j)
                .unwrap_or(i)
        })
        .collect();
    let dual = DualSolution {
        lambda_star,
        value,
        inner_argmax,
        lambda_bound: bound,
        gap: Some(certificate.gap),
        inner_residual: None,
        evaluations: best.evaluations,
    };
    Ok(EntropicSolution {
        dual,
        primal_coupling: coupling,
        primal_value: certificate.primal_value,
        feasibility_slack: certificate.slack,
        duality_gap: certificate.gap,
        certificate,
    })
}
