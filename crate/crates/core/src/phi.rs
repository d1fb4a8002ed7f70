//! phi-divergence regularized WDRO.
//!
//! For a convex `phi` with `phi(1) = 0` and conjugate `phi*`, the dual is
//!
//! ```text
//! inf_{lambda >= 0, psi} lambda rho + E_P max_y [f(y) - lambda c(x, y) - psi(x, y)]
//!                        + beta sum_{x, y} pi0(x, y) phi*(psi(x, y) / beta)
//! ```
//!
//! with `beta = eps + lambda delta`. The objective separates over rows of
//! `psi`. Since `phi*` is nondecreasing, an optimal row has the form
//! `psi(x, .) = f - lambda c(x, .) - t(x)`, and `t(x)` solves the scalar
//! optimality condition `sum_y pi0(y|x) phi*'((f - lambda c - t) / beta) = 1`.
//! [`InnerSolver::RowReduction`] solves that condition by bisection;
//! [`InnerSolver::Subgradient`] runs plain subgradient descent on the full
//! matrix and is kept for comparison.

use serde::{Deserialize, Serialize};

use crate::cost::ReferenceCoupling;
use crate::dual::{DualSolution, ProblemSpec};
use crate::entropic::{lambda_bar, BETA_FLOOR};
use crate::error::{Result, WdroError};
use crate::measures::Coupling;
use crate::par::map_rows;
use crate::scalar::golden_section;
use crate::softmax::weighted_max;

pub const LAMBDA_TOL: f64 = 1e-10;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiSpec {
    /// `phi(t) = t log t - t + 1`, `phi*(s) = e^s - 1`.
    Kl,
    /// `phi(t) = (t - 1)^2`, `phi*(s) = s + s^2 / 4` for `s >= -2`, else `-1`.
    Chi2,
}

impl PhiSpec {
    pub fn phi(self, t: f64) -> f64 {
        match self {
            PhiSpec::Kl if t == 0.0 => 1.0,
            PhiSpec::Kl => t * t.ln() - t + 1.0,
            PhiSpec::Chi2 => (t - 1.0).powi(2),
        }
    }

    pub fn conjugate(self, s: f64) -> f64 {
        match self {
            PhiSpec::Kl => s.exp_m1(),
            PhiSpec::Chi2 if s >= -2.0 => s + 0.25 * s * s,
            PhiSpec::Chi2 => -1.0,
        }
    }

    /// Derivative of the conjugate; nonnegative and nondecreasing, equal to 1 at 0.
    pub fn conjugate_derivative(self, s: f64) -> f64 {
        match self {
            PhiSpec::Kl => s.exp(),
            PhiSpec::Chi2 => (1.0 + 0.5 * s).max(0.0),
        }
    }
}

impl std::fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhiSpec::Kl => "kl",
            PhiSpec::Chi2 => "chi2",
        })
    }
}

impl std::str::FromStr for PhiSpec {
    type Err = WdroError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(PhiSpec::Kl),
            "chi2" => Ok(PhiSpec::Chi2),
            other => Err(WdroError::param("phi", format!("unknown divergence `{other}`, expected kl or chi2"))),
        }
    }
}

pub fn phi_conjugate(spec: PhiSpec, s: f64) -> f64 {
    spec.conjugate(s)
}

/// `D_phi(pi | pi0) = sum pi0 phi(pi / pi0)`; infinite unless `pi << pi0`.
pub fn phi_divergence(spec: PhiSpec, pi: &Coupling, pi0: &Coupling) -> Result<f64> {
    if pi.grid() != pi0.grid() {
        return Err(WdroError::GridMismatch);
    }
    let mut total = 0.0;
    for (&a, &b) in pi.weights().iter().zip(pi0.weights()) {
        if b > 0.0 {
            total += b * spec.phi(a / b);
        } else if a > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(total)
}

/// Dense `n x n` potential, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    n: usize,
    psi: Vec<f64>,
}

impl PotentialField {
    pub fn new(n: usize, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != n * n {
            return Err(WdroError::LengthMismatch {
                expected: n * n,
                got: psi.len(),
            });
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(WdroError::param("psi", "entries must be finite"));
        }
        Ok(PotentialField { n, psi })
    }

    pub fn zeros(n: usize) -> Self {
        PotentialField { n, psi: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.psi[i * self.n..(i + 1) * self.n]
    }
}

fn shifted_row(prob: &ProblemSpec, i: usize, lam: f64) -> Vec<f64> {
    prob.objective()
        .iter()
        .zip(prob.cost_row(i))
        .map(|(f, c)| f - lam * c)
        .collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(WdroError::DegenerateTilt);
    }
    Ok(())
}

/// Objective of the joint `(lambda, psi)` minimization. `pi0_base` is the
/// reference coupling; cells where it vanishes carry no penalty.
#[allow(clippy::too_many_arguments)]
pub fn phi_dual_objective(
    prob: &ProblemSpec,
    eps: f64,
    delta: f64,
    pi0_base: &Coupling,
    lam: f64,
    psi: &PotentialField,
    spec: PhiSpec,
) -> Result<f64> {
    if !(lam.is_finite() && lam >= 0.0) {
        return Err(WdroError::param("lambda", format!("must be >= 0, got {lam}")));
    }
    let beta = eps + lam * delta;
    check_beta(beta)?;
    if pi0_base.grid() != prob.grid() {
        return Err(WdroError::GridMismatch);
    }
    let n = prob.n();
    if psi.n() != n {
        return Err(WdroError::LengthMismatch { expected: n, got: psi.n() });
    }
    let w = prob.distribution().weights();
    let rows = map_rows(n, n, |i| {
        let h = shifted_row(prob, i, lam);
        let prow = psi.row(i);
        let top = if w[i] > 0.0 {
            w[i] * h.iter().zip(prow).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)
        } else {
            0.0
        };
        let pen: f64 = pi0_base
            .row(i)
            .iter()
            .zip(prow)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, p)| m * spec.conjugate(p / beta))
            .sum();
        top + beta * pen
    });
    Ok(lam * prob.rho() + rows.into_iter().sum::<f64>())
}

/// Per-row potential for the KL case: `psi = f - lam c - beta log sum pi0(.|x) e^{(f - lam c)/beta}`.
pub fn kl_optimal_potential(prob: &ProblemSpec, pi0: &ReferenceCoupling, lam: f64, beta: f64) -> Result<PotentialField> {
    check_beta(beta)?;
    let n = prob.n();
    let mut psi = Vec::with_capacity(n * n);
    for i in 0..n {
        let h = shifted_row(prob, i, lam);
        let v = crate::softmax::soft_max(pi0.conditional_row(i), &h, beta);
        psi.extend(h.iter().map(|x| x - v));
    }
    PotentialField::new(n, psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnerSolver {
    /// Exact row-wise reduction to a scalar root-finding problem.
    RowReduction,
    /// Subgradient descent on `psi` with steps `a / k`, warm-started across
    /// `lambda` probes.
    Subgradient { iterations: usize },
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver::RowReduction
    }
}

struct RowOutcome {
    /// Row contribution per unit of `P` mass, `max(h - psi) + beta sum cond phi*(psi/beta)`.
    value: f64,
    residual: f64,
}

fn derivative_sum(spec: PhiSpec, cond: &[f64], h: &[f64], t: f64, beta: f64) -> f64 {
    cond.iter()
        .zip(h)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, x)| w * spec.conjugate_derivative((x - t) / beta))
        .sum()
}

fn row_value(spec: PhiSpec, cond: &[f64], h: &[f64], t: f64, beta: f64) -> f64 {
    let pen: f64 = cond
        .iter()
        .zip(h)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, x)| w * spec.conjugate((x - t) / beta))
        .sum();
    t + beta * pen
}

/// Minimizes `t + beta sum cond phi*((h - t) / beta)` over `t`. The derivative
/// is nonpositive at the smallest supported `h` and nonnegative at the largest.
fn reduce_row(spec: PhiSpec, cond: &[f64], h: &[f64], beta: f64) -> RowOutcome {
    let (hi0, _) = weighted_max(cond, h).expect("row has no positive weight");
    if beta < BETA_FLOOR {
        return RowOutcome { value: hi0, residual: 0.0 };
    }
    let lo0 = cond
        .iter()
        .zip(h)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, x)| *x)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if derivative_sum(spec, cond, h, mid, beta) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t, r) = [lo, hi]
        .into_iter()
        .map(|t| (t, (derivative_sum(spec, cond, h, t, beta) - 1.0).abs()))
        .fold((hi, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    RowOutcome {
        value: row_value(spec, cond, h, t, beta),
        residual: r,
    }
}

/// Subgradient descent on one row of `psi` (updated in place).
fn descend_row(spec: PhiSpec, cond: &[f64], h: &[f64], beta: f64, psi: &mut [f64], iterations: usize) -> RowOutcome {
    let (hmax, _) = weighted_max(cond, h).expect("row has no positive weight");
    if beta < BETA_FLOOR {
        return RowOutcome { value: hmax, residual: 0.0 };
    }
    let eval = |psi: &[f64]| {
        let top = h.iter().zip(psi).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        let pen: f64 = cond
            .iter()
            .zip(psi)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| w * spec.conjugate(p / beta))
            .sum();
        top + beta * pen
    };
    let scale = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - h.iter().cloned().fold(f64::INFINITY, f64::min)
        + beta;
    let mut best_val = eval(psi);
    let mut best = psi.to_vec();
    let mut g = vec![0.0; psi.len()];
    for k in 1..=iterations {
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for (j, (a, b)) in h.iter().zip(psi.iter()).enumerate() {
            if a - b > top {
                top = a - b;
                arg = j;
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = if cond[j] > 0.0 { cond[j] * spec.conjugate_derivative(psi[j] / beta) } else { 0.0 };
        }
        g[arg] -= 1.0;
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let step = scale / (k as f64 * norm);
        psi.iter_mut().zip(&g).for_each(|(p, gj)| *p -= step * gj);
        let v = eval(psi);
        if v < best_val {
            best_val = v;
            best.copy_from_slice(psi);
        }
    }
    psi.copy_from_slice(&best);
    let residual = (cond
        .iter()
        .zip(psi.iter())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, p)| w * spec.conjugate_derivative(p / beta))
        .sum::<f64>()
        - 1.0)
        .abs();
    RowOutcome { value: best_val, residual }
}

/// Upper end of the `lambda` search. For KL this is the proven bound
/// `2 sup|f| / (rho - E_{pi0} c)`; for chi2 the heuristic `4 osc(f) / (rho - E_{pi0} c)`.
pub fn lambda_high(prob: &ProblemSpec, pi0: &ReferenceCoupling, spec: PhiSpec) -> Result<f64> {
    let kl = lambda_bar(prob, pi0)?;
    Ok(match spec {
        PhiSpec::Kl => kl,
        PhiSpec::Chi2 => 4.0 * prob.oscillation() / (prob.rho() - pi0.expected_cost()),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiSolverOptions {
    pub inner: InnerSolver,
}

pub fn solve_phi_dual(
    prob: &ProblemSpec,
    eps: f64,
    delta: f64,
    pi0: &ReferenceCoupling,
    spec: PhiSpec,
) -> Result<DualSolution> {
    solve_phi_dual_with(prob, eps, delta, pi0, spec, PhiSolverOptions::default())
}

pub fn solve_phi_dual_with(
    prob: &ProblemSpec,
    eps: f64,
    delta: f64,
    pi0: &ReferenceCoupling,
    spec: PhiSpec,
    options: PhiSolverOptions,
) -> Result<DualSolution> {
    for (name, v) in [("eps", eps), ("delta", delta)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(WdroError::param(name, format!("must be >= 0, got {v}")));
        }
    }
    if eps + delta <= 0.0 {
        return Err(WdroError::Config("eps + delta = 0: use the cost-regularized solver".into()));
    }
    let bound = lambda_high(prob, pi0, spec)?;
    let n = prob.n();
    let w = prob.distribution().weights();
    let mut warm = vec![0.0; n * n];
    let inner = |lam: f64, psi: &mut Vec<f64>| -> (f64, f64) {
        let beta = eps + lam * delta;
        let rows: Vec<Option<RowOutcome>> = match options.inner {
            InnerSolver::RowReduction => map_rows(n, n, |i| {
                (w[i] > 0.0).then(|| reduce_row(spec, pi0.conditional_row(i), &shifted_row(prob, i, lam), beta))
            }),
            InnerSolver::Subgradient { iterations } => {
                let chunks: Vec<(usize, &mut [f64])> = psi.chunks_mut(n).enumerate().collect();
                use rayon::prelude::*;
                chunks
                    .into_par_iter()
                    .map(|(i, row)| {
                        (w[i] > 0.0).then(|| {
                            descend_row(spec, pi0.conditional_row(i), &shifted_row(prob, i, lam), beta, row, iterations)
                        })
                    })
                    .collect()
            }
        };
        let mut value = lam * prob.rho();
        let mut residual: f64 = 0.0;
        for (i, r) in rows.into_iter().enumerate() {
            if let Some(r) = r {
                value += w[i] * r.value;
                residual = residual.max(r.residual);
            }
        }
        (value, residual)
    };
    let best = golden_section(|lam| inner(lam, &mut warm).0, 0.0, bound, LAMBDA_TOL);
    let (value, residual) = inner(best.x, &mut warm);
    let inner_argmax = (0..n)
        .map(|i| {
            weighted_max(pi0.conditional_row(i), &shifted_row(prob, i, best.x))
                .map(|(_, j)| j)
                .unwrap_or(i)
        })
        .collect();
    Ok(DualSolution {
        lambda_star: best.x,
        value,
        inner_argmax,
        lambda_bound: bound,
        gap: None,
        inner_residual: Some(residual),
        evaluations: best.evaluations + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_reference, calibrate_sigma};
    use crate::dual::solve_cost_reg;
    use crate::entropic::{entropic_dual_value, solve_entropic, RegParams};
    use crate::instances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, n: usize) -> (ProblemSpec, ReferenceCoupling) {
        let prob = instances::random_problem(seed, n);
        let sigma = calibrate_sigma(prob.distribution(), prob.cost_spec(), prob.rho()).unwrap();
        let pi0 = build_reference(prob.distribution(), prob.cost_spec(), sigma).unwrap();
        (prob, pi0)
    }

    fn brute_conjugate(spec: PhiSpec, s: f64) -> f64 {
        (0..=1_000_000)
            .map(|k| {
                let t = 100.0 * k as f64 / 1_000_000.0;
                s * t - spec.phi(t)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn conjugate_values() {
        assert_eq!(phi_conjugate(PhiSpec::Kl, 0.0), 0.0);
        assert_eq!(phi_conjugate(PhiSpec::Chi2, 0.0), 0.0);
        for s in [-3.0, 1.0, 2.0] {
            let b = brute_conjugate(PhiSpec::Chi2, s);
            assert!((phi_conjugate(PhiSpec::Chi2, s) - b).abs() < 1e-6, "s = {s}");
        }
        for s in [-2.0, 0.5, 1.5] {
            let b = brute_conjugate(PhiSpec::Kl, s);
            assert!((phi_conjugate(PhiSpec::Kl, s) - b).abs() < 1e-6, "s = {s}");
        }
        assert_eq!(PhiSpec::Kl.phi(1.0), 0.0);
        assert_eq!(PhiSpec::Chi2.phi(1.0), 0.0);
    }

    #[test]
    fn conjugates_convex_nondecreasing() {
        for spec in [PhiSpec::Kl, PhiSpec::Chi2] {
            let s: Vec<f64> = (0..=400).map(|k| -5.0 + 0.025 * k as f64).collect();
            let v: Vec<f64> = s.iter().map(|&x| spec.conjugate(x)).collect();
            for k in 1..v.len() {
                assert!(v[k] >= v[k - 1] - 1e-15);
            }
            for k in 1..v.len() - 1 {
                assert!(v[k - 1] + v[k + 1] - 2.0 * v[k] >= -1e-12);
            }
        }
    }

    #[test]
    fn zero_potential_is_unsmoothed_lagrangian() {
        let (prob, pi0) = setup(4, 9);
        let lam = 0.6;
        let psi = PotentialField::zeros(9);
        let v = phi_dual_objective(&prob, 0.1, 0.1, pi0.coupling(), lam, &psi, PhiSpec::Kl).unwrap();
        let u = crate::dual::dual_value_cost_reg(&prob, 0.0, 0.0, lam).unwrap();
        assert!((v - u).abs() < 1e-12);
    }

    #[test]
    fn closed_form_potential_matches_entropic() {
        for seed in 0..4 {
            let (prob, pi0) = setup(seed, 11);
            let (eps, delta) = (0.05, 0.1);
            let reg = RegParams::new(eps, delta, pi0.sigma()).unwrap();
            for lam in [0.0, 0.3, 2.0] {
                let psi = kl_optimal_potential(&prob, &pi0, lam, eps + lam * delta).unwrap();
                let v = phi_dual_objective(&prob, eps, delta, pi0.coupling(), lam, &psi, PhiSpec::Kl).unwrap();
                let e = entropic_dual_value(&prob, &reg, &pi0, lam).unwrap();
                assert!((v - e).abs() < 1e-9, "seed {seed} lam {lam}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn random_potentials_dominate_entropic() {
        let (prob, pi0) = setup(9, 9);
        let reg = RegParams::new(0.1, 0.05, pi0.sigma()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let lam = rng.gen_range(0.0..3.0);
            let psi: Vec<f64> = (0..81).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let psi = PotentialField::new(9, psi).unwrap();
            let v = phi_dual_objective(&prob, 0.1, 0.05, pi0.coupling(), lam, &psi, PhiSpec::Kl).unwrap();
            assert!(v >= entropic_dual_value(&prob, &reg, &pi0, lam).unwrap() - 1e-12);
        }
    }

    #[test]
    fn zero_beta_is_rejected() {
        let (prob, pi0) = setup(0, 5);
        let psi = PotentialField::zeros(5);
        assert!(matches!(
            phi_dual_objective(&prob, 0.0, 0.3, pi0.coupling(), 0.0, &psi, PhiSpec::Kl),
            Err(WdroError::DegenerateTilt)
        ));
    }

    #[test]
    fn kl_matches_entropic_solver() {
        for seed in 0..5 {
            let (prob, pi0) = setup(seed, 7);
            let reg = RegParams::new(0.05, 0.05, pi0.sigma()).unwrap();
            let e = solve_entropic(&prob, &reg, &pi0).unwrap();
            let p = solve_phi_dual(&prob, 0.05, 0.05, &pi0, PhiSpec::Kl).unwrap();
            assert!((e.dual.value - p.value).abs() < 1e-8);
            assert!(p.inner_residual.unwrap() < 1e-9);
        }
    }

    #[test]
    fn constant_objective_any_spec() {
        let (prob, pi0) = setup(2, 7);
        let k = prob.with_objective(vec![0.7; 7]).unwrap();
        for spec in [PhiSpec::Kl, PhiSpec::Chi2] {
            let s = solve_phi_dual(&k, 0.1, 0.1, &pi0, spec).unwrap();
            assert!((s.value - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn chi2_bracketed_by_primal_and_unregularized() {
        let (prob, pi0) = setup(11, 5);
        let (eps, delta) = (0.05, 0.05);
        let s = solve_phi_dual(&prob, eps, delta, &pi0, PhiSpec::Chi2).unwrap();
        let upper = solve_cost_reg(&prob, 0.0, 0.0).unwrap().value;
        // feasible primal points: mixtures of pi0 and the exp-tilted coupling
        let reg = RegParams::new(0.1, 0.1, pi0.sigma()).unwrap();
        let tilted = crate::entropic::recover_primal(&prob, &reg, &pi0, 0.0).unwrap();
        let mut lower = f64::NEG_INFINITY;
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let w: Vec<f64> = pi0
                .coupling()
                .weights()
                .iter()
                .zip(tilted.weights())
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect();
            let pi = Coupling::new(prob.grid().clone(), w).unwrap();
            let d = phi_divergence(PhiSpec::Chi2, &pi, pi0.coupling()).unwrap();
            let c = crate::cost::expected_cost(&pi, prob.cost_spec());
            if c + delta * d <= prob.rho() {
                let ef = pi.marginal(crate::measures::Axis::Second).expectation(prob.objective()).unwrap();
                lower = lower.max(ef - eps * d);
            }
        }
        assert!(lower.is_finite());
        assert!(lower <= s.value + 1e-9 && s.value <= upper + 1e-9, "{lower} {} {upper}", s.value);
        assert!(s.inner_residual.unwrap() < 1e-9);
    }

    #[test]
    fn subgradient_approaches_row_reduction() {
        let (prob, pi0) = setup(6, 7);
        let exact = solve_phi_dual(&prob, 0.1, 0.1, &pi0, PhiSpec::Kl).unwrap();
        let opts = PhiSolverOptions {
            inner: InnerSolver::Subgradient { iterations: 2000 },
        };
        let sub = solve_phi_dual_with(&prob, 0.1, 0.1, &pi0, PhiSpec::Kl, opts).unwrap();
        assert!(sub.value >= exact.value - 1e-9);
        assert!(sub.value - exact.value < 5e-2, "{} vs {}", sub.value, exact.value);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn jointly_convex(seed in 0u64..300, t in 0.0f64..1.0, l1 in 0.0f64..3.0, l2 in 0.0f64..3.0,
                              chi in any::<bool>(), s in 0u64..1000) {
                let (prob, pi0) = setup(seed, 5);
                let spec = if chi { PhiSpec::Chi2 } else { PhiSpec::Kl };
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let a: Vec<f64> = (0..25).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let b: Vec<f64> = (0..25).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
                let obj = |l: f64, p: &[f64]| {
                    phi_dual_objective(&prob, 0.1, 0.1, pi0.coupling(), l, &PotentialField::new(5, p.to_vec()).unwrap(), spec).unwrap()
                };
                let lhs = obj(t * l1 + (1.0 - t) * l2, &m);
                let rhs = t * obj(l1, &a) + (1.0 - t) * obj(l2, &b);
                prop_assert!(lhs <= rhs + 1e-8);
            }
        }
    }
}
