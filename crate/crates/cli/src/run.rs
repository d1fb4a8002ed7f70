//! Command implementations. Each takes a validated config, writes its
//! artifacts under `config.output` and returns the one-line summary.

use wdro::approx::{lagrangian_gap_check, optimal_block_radius, radius_compare, sweep as run_sweep};
use wdro::cost::{build_reference, calibrate_sigma, ReferenceCoupling};
use wdro::dual::{primal_lp_unreg, solve_cost_reg, MAX_PRIMAL_LP_POINTS};
use wdro::entropic::{lambda_bar, solve_entropic, RegParams};
use wdro::measures::Axis;
use wdro::ot::{sinkhorn, wasserstein_exact};
use wdro::{instances, solve_phi_dual, Objective, ProblemSpec};

use crate::config::{
    CostConfig, DistributionConfig, DomainConfig, Method, RegConfig, RunConfig, SigmaSetting,
};
use crate::report::{emit_report, write_json, OracleReport, RadiusRow, SolveReport, VerifyReport};
use crate::{CliError, Result};

/// `delta / sigma` ratios used by `verify`.
pub const RADIUS_RATIOS: [f64; 2] = [0.1, 0.5];
/// Sinkhorn regularization used by `oracle` when `eps = 0`.
pub const DEFAULT_SINKHORN_EPS: f64 = 0.05;

fn output_dir(cfg: &RunConfig) -> Result<&std::path::Path> {
    std::fs::create_dir_all(&cfg.output).map_err(|source| CliError::Io {
        path: cfg.output.clone(),
        source,
    })?;
    Ok(&cfg.output)
}

pub fn resolve_sigma(cfg: &RunConfig, prob: &ProblemSpec) -> Result<f64> {
    Ok(match cfg.reg.sigma {
        SigmaSetting::Fixed(s) => s,
        SigmaSetting::Auto(_) => calibrate_sigma(prob.distribution(), prob.cost_spec(), prob.rho())?,
    })
}

fn reference(cfg: &RunConfig, prob: &ProblemSpec) -> Result<ReferenceCoupling> {
    let sigma = resolve_sigma(cfg, prob)?;
    Ok(build_reference(prob.distribution(), prob.cost_spec(), sigma)?)
}

pub fn solve_report(cfg: &RunConfig) -> Result<SolveReport> {
    let prob = cfg.problem()?;
    let RegConfig { eps, delta, .. } = cfg.reg;
    let mut rep = SolveReport {
        method: cfg.method.name().to_string(),
        eps,
        delta,
        sigma: None,
        phi: None,
        rho: prob.rho(),
        points: prob.n(),
        value: 0.0,
        lambda_star: 0.0,
        lambda_bound: 0.0,
        gap: None,
        inner_residual: None,
        feasibility_slack: None,
        complementarity: None,
        evaluations: 0,
        inner_argmax: Vec::new(),
    };
    let dual = match cfg.method {
        Method::Unreg | Method::CostReg => {
            let (e, d) = if cfg.method == Method::Unreg { (0.0, 0.0) } else { (eps, delta) };
            rep.eps = e;
            rep.delta = d;
            let dual = solve_cost_reg(&prob, e, d)?;
            if cfg.method == Method::Unreg && prob.n() <= MAX_PRIMAL_LP_POINTS {
                rep.gap = Some(dual.value - primal_lp_unreg(&prob)?.value);
            }
            dual
        }
        Method::Entropic => {
            let pi0 = reference(cfg, &prob)?;
            rep.sigma = Some(pi0.sigma());
            let s = solve_entropic(&prob, &RegParams::new(eps, delta, pi0.sigma())?, &pi0)?;
            rep.gap = Some(s.duality_gap);
            rep.feasibility_slack = Some(s.feasibility_slack);
            rep.complementarity = Some(s.certificate.complementarity);
            s.dual
        }
        Method::Phi => {
            let spec = cfg.phi.expect("validated");
            let pi0 = reference(cfg, &prob)?;
            rep.sigma = Some(pi0.sigma());
            rep.phi = Some(spec.to_string());
            solve_phi_dual(&prob, eps, delta, &pi0, spec)?
        }
    };
    rep.value = dual.value;
    rep.lambda_star = dual.lambda_star;
    rep.lambda_bound = dual.lambda_bound;
    rep.inner_residual = rep.inner_residual.or(dual.inner_residual);
    rep.evaluations = dual.evaluations;
    rep.inner_argmax = dual.inner_argmax;
    Ok(rep)
}

pub fn solve(cfg: &RunConfig) -> Result<String> {
    let rep = solve_report(cfg)?;
    write_json(&output_dir(cfg)?.join("solution.json"), &rep)?;
    Ok(rep.summary())
}

pub fn sweep(cfg: &RunConfig) -> Result<String> {
    let grid = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("`sweep`: missing; add it to the config or pass --eps".into()))?;
    let prob = cfg.problem()?;
    let pi0 = reference(cfg, &prob)?;
    let rep = run_sweep(&prob, &pi0, &grid.eps, &grid.delta)?;
    emit_report(&rep, output_dir(cfg)?)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    Ok(format!(
        "rows={} sigma={:.6e} c_fit={} rate_spread={} gaps_nonnegative={}",
        rep.rows.len(),
        rep.sigma,
        fmt(rep.c_fit),
        fmt(rep.rate_spread()),
        rep.all_gaps_nonnegative
    ))
}

pub fn verify_report(cfg: &RunConfig) -> Result<VerifyReport> {
    let RegConfig { eps, delta, .. } = cfg.reg;
    if eps + delta <= 0.0 {
        return Err(CliError::Config("`reg`: verify needs eps + delta > 0".into()));
    }
    let prob = cfg.problem()?;
    let pi0 = reference(cfg, &prob)?;
    let sigma = pi0.sigma();
    let reg = RegParams::new(eps, delta, sigma)?;
    let bar = lambda_bar(&prob, &pi0)?;
    let dim = prob.grid().dim() as f64;
    let radius = optimal_block_radius(&prob, &reg, &pi0)?.min(dim);
    let lagrangian = [0.0, 0.5 * bar, bar]
        .iter()
        .map(|&lam| lagrangian_gap_check(&prob, &reg, &pi0, lam, radius))
        .collect::<wdro::Result<Vec<_>>>()?;
    // the radius comparison needs the linear-programming primal
    let ratios: &[f64] = if prob.n() <= MAX_PRIMAL_LP_POINTS { &RADIUS_RATIOS } else { &[] };
    let radius = ratios
        .iter()
        .map(|&ratio| {
            Ok(RadiusRow {
                delta_over_sigma: ratio,
                delta: ratio * sigma,
                comparison: radius_compare(&prob, ratio * sigma, sigma)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_pass = lagrangian.iter().all(|c| c.holds)
        && radius.iter().all(|r| r.comparison.monotone && r.comparison.bound_holds);
    Ok(VerifyReport {
        eps,
        delta,
        sigma,
        lambda_bar: bar,
        lagrangian,
        radius,
        all_pass,
    })
}

/// Writes `verify.json`; fails with [`CliError::Diagnostics`] when any check fails.
pub fn verify(cfg: &RunConfig) -> Result<String> {
    let rep = verify_report(cfg)?;
    write_json(&output_dir(cfg)?.join("verify.json"), &rep)?;
    let mut lines = Vec::new();
    for c in &rep.lagrangian {
        lines.push(format!(
            "lagrangian lambda={:.6} r={:.6e} lhs={:.8} rhs={:.8} {}",
            c.lambda,
            c.delta_radius,
            c.lhs,
            c.rhs,
            if c.holds { "ok" } else { "FAIL" }
        ));
    }
    for r in &rep.radius {
        let c = &r.comparison;
        lines.push(format!(
            "radius delta/sigma={} f_rho={:.8} f_shrunk={:.8} bound={:.8} {}",
            r.delta_over_sigma,
            c.f_rho,
            c.f_shrunk,
            c.bound,
            if c.monotone && c.bound_holds { "ok" } else { "FAIL" }
        ));
    }
    if rep.radius.is_empty() {
        lines.push(format!("radius skipped: more than {MAX_PRIMAL_LP_POINTS} grid points"));
    }
    let text = lines.join("\n");
    if rep.all_pass {
        Ok(text)
    } else {
        Err(CliError::Diagnostics(text))
    }
}

pub fn oracle_report(cfg: &RunConfig) -> Result<OracleReport> {
    let prob = cfg.problem()?;
    let dual = solve_cost_reg(&prob, 0.0, 0.0)?;
    let sinkhorn_eps = if cfg.reg.eps > 0.0 { cfg.reg.eps } else { DEFAULT_SINKHORN_EPS };
    let mut rep = OracleReport {
        dual_value: dual.value,
        lambda_star: dual.lambda_star,
        primal_lp_value: None,
        lp_gap: None,
        worst_case_transport: None,
        sinkhorn_eps,
        sinkhorn: None,
        entropic: None,
    };
    if prob.n() <= MAX_PRIMAL_LP_POINTS {
        let primal = primal_lp_unreg(&prob)?;
        rep.primal_lp_value = Some(primal.value);
        rep.lp_gap = Some(dual.value - primal.value);
        let q = primal.coupling.marginal(Axis::Second);
        rep.worst_case_transport = Some(wasserstein_exact(prob.distribution(), &q, prob.cost_spec())?.value);
        rep.sinkhorn = Some(sinkhorn(prob.distribution(), &q, prob.cost_spec(), sinkhorn_eps)?.summary());
    }
    if cfg.reg.eps + cfg.reg.delta > 0.0 {
        let pi0 = reference(cfg, &prob)?;
        let s = solve_entropic(&prob, &RegParams::new(cfg.reg.eps, cfg.reg.delta, pi0.sigma())?, &pi0)?;
        rep.entropic = Some(s.certificate);
    }
    Ok(rep)
}

pub fn oracle(cfg: &RunConfig) -> Result<String> {
    let rep = oracle_report(cfg)?;
    write_json(&output_dir(cfg)?.join("oracle.json"), &rep)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3e}"));
    Ok(format!(
        "dual={:.10} lp_gap={} transport={} entropic_gap={}",
        rep.dual_value,
        fmt(rep.lp_gap),
        fmt(rep.worst_case_transport),
        fmt(rep.entropic.map(|c| c.gap))
    ))
}

/// Config for [`instances::random_problem`] with an entropic solve at
/// `eps = delta = 0.01` and calibrated sigma.
pub fn gen_instance(seed: u64, points: usize) -> Result<RunConfig> {
    if points < 2 {
        return Err(CliError::Config("`points`: must be >= 2".into()));
    }
    let prob = instances::random_problem(seed, points);
    let spec = prob.cost_spec();
    let bounds = prob.grid().bounds().iter().map(|&(a, b)| [a, b]).collect();
    let cfg = RunConfig {
        domain: DomainConfig {
            bounds,
            dim: None,
            points_per_axis: points,
        },
        distribution: DistributionConfig::Weights {
            weights: prob.distribution().weights().to_vec(),
        },
        objective: Objective::Tabulated {
            values: prob.objective().to_vec(),
        },
        cost: CostConfig {
            norm: spec.norm,
            p: spec.p,
        },
        rho: prob.rho(),
        reg: RegConfig {
            eps: 0.01,
            delta: 0.01,
            sigma: SigmaSetting::default(),
        },
        method: Method::Entropic,
        phi: None,
        seed,
        output: "wdro-out".into(),
        sweep: None,
    };
    cfg.validate()?;
    Ok(cfg)
}
