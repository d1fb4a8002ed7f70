use proptest::prelude::*;

use wdro::approx::{block_approximation, lagrangian_gap_check, lagrangian_targets, sweep};
use wdro::cost::{build_reference, calibrate_sigma, ReferenceCoupling};
use wdro::dual::{dual_value_cost_reg, solve_cost_reg, ProblemSpec};
use wdro::entropic::{solve_entropic, RegParams};
use wdro::instances;
use wdro::measures::{kl_divergence, Axis};

fn calibrated(prob: &ProblemSpec) -> ReferenceCoupling {
    let sigma = calibrate_sigma(prob.distribution(), prob.cost_spec(), prob.rho()).unwrap();
    build_reference(prob.distribution(), prob.cost_spec(), sigma).unwrap()
}

#[test]
fn block_kl_matches_cell_sum() {
    let prob = instances::shipped();
    let pi0 = calibrated(&prob);
    let reg = RegParams::new(0.01, 0.0, pi0.sigma()).unwrap();
    let targets = lagrangian_targets(&prob, &reg, 1.0);
    for r in [0.02, 0.1, 0.4] {
        let b = block_approximation(&targets, &pi0, r).unwrap();
        let mut direct = 0.0;
        for (x, y) in b.weights().iter().zip(pi0.coupling().weights()) {
            if *x > 0.0 {
                direct += x * (x / y).ln();
            }
        }
        let kl = kl_divergence(&b, pi0.coupling()).unwrap();
        assert!((kl - direct).abs() < 1e-10);
    }
}

#[test]
fn constant_objective_lagrangian_margin() {
    let prob = instances::shipped();
    let k = prob.with_objective(vec![2.0; prob.n()]).unwrap();
    let pi0 = calibrated(&k);
    let reg = RegParams::new(0.05, 0.05, pi0.sigma()).unwrap();
    for lam in [0.0, 1.0, 5.0] {
        let c = lagrangian_gap_check(&k, &reg, &pi0, lam, 0.1).unwrap();
        assert!(c.holds && c.lhs < c.rhs);
    }
}

#[test]
fn full_radius_volume_term() {
    // V = 1 on [0, 1] and r = 1, so -log(V r^d) vanishes
    let prob = instances::shipped();
    let pi0 = calibrated(&prob);
    let reg = RegParams::new(0.05, 0.0, pi0.sigma()).unwrap();
    let c = lagrangian_gap_check(&prob, &reg, &pi0, 0.0, 1.0).unwrap();
    assert!((c.volume_constant - 1.0).abs() < 1e-12);
    let c2 = lagrangian_gap_check(&prob, &reg, &pi0, 0.0, 0.5).unwrap();
    // halving r adds beta * log 2 through the volume term, minus the Lipschitz and r^p terms
    let lf = wdro::cost::lipschitz_estimate(prob.grid(), prob.objective()).unwrap();
    let expect = c.rhs - lf * 0.5 + 0.05 * (2f64.ln() + (0.5 - 1.0) / pi0.sigma());
    assert!((c2.rhs - expect).abs() < 1e-12);
}

#[test]
fn shipped_sweep_bounds() {
    let prob = instances::shipped();
    let pi0 = calibrated(&prob);
    let rep = sweep(&prob, &pi0, &[1e-3], &[0.0, 1e-3, 1e-2]).unwrap();
    let c = rep.c_fit.unwrap();
    let mut prev_eta = 0.0;
    for r in &rep.rows {
        assert!(r.eta > prev_eta);
        prev_eta = r.eta;
        assert!(r.lambda_star <= r.lambda_bar + 1e-9);
        assert!(r.gap >= -1e-8);
        if r.eta < (-1f64).exp() {
            assert!(r.gap <= c * r.eta * (1.0 / r.eta).ln() * rep.dim as f64 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unregularized_nondecreasing_in_rho(seed in 0u64..1000, n in 3usize..20) {
        let prob = instances::random_problem(seed, n);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=8 {
            let v = solve_cost_reg(&prob.with_rho(0.05 * k as f64).unwrap(), 0.0, 0.0).unwrap().value;
            prop_assert!(v >= prev - 1e-9);
            prev = v;
        }
    }

    #[test]
    fn cost_regularization_sandwich(seed in 0u64..1000, eps in 0.0f64..0.5, delta in 0.0f64..0.5) {
        let prob = instances::random_problem(seed, 11);
        let upper = solve_cost_reg(&prob, 0.0, 0.0).unwrap().value;
        let mid = solve_cost_reg(&prob, eps, delta).unwrap().value;
        let shrunk = prob.with_rho(prob.rho() / (1.0 + delta)).unwrap();
        let lower = solve_cost_reg(&shrunk, 0.0, 0.0).unwrap().value - eps * prob.rho() / (1.0 + delta);
        prop_assert!(lower <= mid + 1e-8 && mid <= upper + 1e-8);
    }

    #[test]
    fn block_is_a_coupling_of_p(seed in 0u64..1000, r in 0.001f64..1.5, lam in 0.0f64..5.0) {
        let prob = instances::random_problem(seed, 13);
        let pi0 = calibrated(&prob);
        let reg = RegParams::new(0.05, 0.05, pi0.sigma()).unwrap();
        let b = block_approximation(&lagrangian_targets(&prob, &reg, lam), &pi0, r).unwrap();
        let m = b.marginal(Axis::First);
        for (x, y) in m.weights().iter().zip(prob.distribution().weights()) {
            prop_assert!((x - y).abs() < 1e-14);
        }
        prop_assert!(kl_divergence(&b, pi0.coupling()).unwrap().is_finite());
    }

    #[test]
    fn dual_function_is_convex(seed in 0u64..1000, a in 0.0f64..4.0, b in 0.0f64..4.0, t in 0.0f64..1.0) {
        let prob = instances::random_problem(seed, 9);
        let g = |l: f64| dual_value_cost_reg(&prob, 0.1, 0.1, l).unwrap();
        prop_assert!(g(t * a + (1.0 - t) * b) <= t * g(a) + (1.0 - t) * g(b) + 1e-12);
    }

    #[test]
    fn entropic_coupling_is_feasible(seed in 0u64..1000, eps in 0.005f64..0.2, delta in 0.0f64..0.2) {
        let prob = instances::random_problem(seed, 11);
        let pi0 = calibrated(&prob);
        let s = solve_entropic(&prob, &RegParams::new(eps, delta, pi0.sigma()).unwrap(), &pi0).unwrap();
        prop_assert!(s.feasibility_slack >= -1e-8, "slack {}", s.feasibility_slack);
        prop_assert!(s.duality_gap >= -1e-8, "gap {}", s.duality_gap);
    }
}
