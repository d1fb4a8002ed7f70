//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdro::approx::{lagrangian_gap_check, optimal_block_radius, radius_compare, sweep};
use wdro::cost::{build_reference, calibrate_sigma, CostSpec, Norm, ReferenceCoupling};
use wdro::dual::{primal_lp_unreg, solve_cost_reg, ProblemSpec};
use wdro::entropic::{lambda_bar, solve_entropic, verify_duality, RegParams};
use wdro::measures::{DiscreteMeasure, Grid};
use wdro::ot::{sinkhorn, sinkhorn_dual_value};
use wdro::phi::{solve_phi_dual, PhiSpec};
use wdro::instances;

type Outcome = Result<String, String>;

/// `(label, lambda*, lambda_bar)` for every entropic-type solve.
type LambdaLog = Vec<(String, f64, f64)>;

fn calibrated(prob: &ProblemSpec) -> ReferenceCoupling {
    let sigma = calibrate_sigma(prob.distribution(), prob.cost_spec(), prob.rho()).expect("calibration");
    build_reference(prob.distribution(), prob.cost_spec(), sigma).expect("reference")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn strong_duality_unreg() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let n = 5 + (seed as usize * 3) % 29;
        let prob = instances::random_problem(seed, n);
        let d = solve_cost_reg(&prob, 0.0, 0.0).map_err(|e| e.to_string())?.value;
        let p = primal_lp_unreg(&prob).map_err(|e| e.to_string())?.value;
        worst = worst.max(rel(d, p));
        ensure(rel(d, p) <= 1e-6, || format!("seed {seed}: dual {d} primal {p}"))?;
    }
    let two = instances::two_point();
    let s = solve_cost_reg(&two, 0.0, 0.0).map_err(|e| e.to_string())?;
    let p = primal_lp_unreg(&two).map_err(|e| e.to_string())?.value;
    ensure(
        (s.value - 0.3).abs() <= 1e-6 && (p - 0.3).abs() <= 1e-6 && (s.lambda_star - 1.0).abs() <= 1e-6,
        || format!("two-point: value {} lambda* {} primal {p}", s.value, s.lambda_star),
    )?;
    Ok(format!("worst relative gap {worst:.2e}; two-point value {:.9} lambda* {:.9}", s.value, s.lambda_star))
}

fn strong_duality_entropic(log: &mut LambdaLog) -> Outcome {
    let (mut gap, mut slack, mut compl) = (0.0f64, f64::INFINITY, 0.0f64);
    for seed in 0..10u64 {
        let prob = instances::random_problem(100 + seed, 9 + seed as usize);
        let pi0 = calibrated(&prob);
        let bar = lambda_bar(&prob, &pi0).map_err(|e| e.to_string())?;
        for eps in [1e-2, 1e-1] {
            for delta in [1e-2, 1e-1] {
                let reg = RegParams::new(eps, delta, pi0.sigma()).map_err(|e| e.to_string())?;
                let s = solve_entropic(&prob, &reg, &pi0).map_err(|e| e.to_string())?;
                let c = verify_duality(&prob, &reg, &pi0, s.dual.lambda_star, &s.primal_coupling)
                    .map_err(|e| e.to_string())?;
                log.push((format!("entropic seed {seed} ({eps}, {delta})"), s.dual.lambda_star, bar));
                gap = gap.max(c.gap.abs() / (1.0 + c.dual_value.abs()));
                slack = slack.min(c.slack);
                compl = compl.max(c.complementarity);
                ensure(c.holds(1e-6, 1e-8, 1e-6), || {
                    format!(
                        "seed {seed} eps {eps} delta {delta}: gap {:.2e} slack {:.2e} compl {:.2e}",
                        c.gap, c.slack, c.complementarity
                    )
                })?;
            }
        }
    }
    Ok(format!("max relative gap {gap:.2e}, min slack {slack:.2e}, max complementarity {compl:.2e}"))
}

fn lambda_bounds(log: &LambdaLog) -> Outcome {
    for (label, lam, bar) in log {
        ensure(*lam <= bar + 1e-9, || format!("{label}: lambda* {lam} > lambda_bar {bar}"))?;
    }
    let tight = log.iter().map(|(_, l, b)| l / b).fold(0.0, f64::max);
    Ok(format!("{} solves, largest lambda*/lambda_bar {tight:.3}", log.len()))
}

fn sandwich() -> Outcome {
    let mut count = 0;
    for seed in 0..5u64 {
        let prob = instances::random_problem(200 + seed, 15);
        let upper = solve_cost_reg(&prob, 0.0, 0.0).map_err(|e| e.to_string())?.value;
        for eps in [0.05, 0.2] {
            for delta in [0.05, 0.2] {
                let mid = solve_cost_reg(&prob, eps, delta).map_err(|e| e.to_string())?.value;
                let r = prob.rho() / (1.0 + delta);
                let shrunk = solve_cost_reg(&prob.with_rho(r).map_err(|e| e.to_string())?, 0.0, 0.0)
                    .map_err(|e| e.to_string())?
                    .value;
                let lower = shrunk - eps * r;
                ensure(lower <= mid + 1e-8 && mid <= upper + 1e-8, || {
                    format!("seed {seed} ({eps}, {delta}): {lower} <= {mid} <= {upper} fails")
                })?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} sandwiches hold"))
}

fn approximation_rate(log: &mut LambdaLog) -> Outcome {
    let prob = instances::shipped();
    let pi0 = calibrated(&prob);
    let rep = sweep(&prob, &pi0, &[1e-1, 1e-2, 1e-3, 1e-4], &[0.0]).map_err(|e| e.to_string())?;
    for r in &rep.rows {
        log.push((format!("sweep eps {}", r.eps), r.lambda_star, r.lambda_bar));
    }
    let gaps: Vec<f64> = rep.rows.iter().map(|r| r.gap).collect();
    ensure(rep.all_gaps_nonnegative, || format!("negative gap in {gaps:?}"))?;
    ensure(gaps.windows(2).all(|w| w[1] < w[0]), || format!("gaps not decreasing: {gaps:?}"))?;
    ensure(gaps[3] <= gaps[0] / 10.0, || format!("gap(1e-4) {} > gap(1e-1)/10", gaps[3]))?;
    let c = rep.c_fit.filter(|c| c.is_finite()).ok_or("C_fit undefined")?;
    let spread = rep.rate_spread().ok_or("no positive rate ratio")?;
    ensure(spread <= 3.0, || format!("rate ratios spread by {spread:.3}"))?;
    Ok(format!(
        "gaps {:.3e} {:.3e} {:.3e} {:.3e}; C_fit {c:.4}, spread {spread:.3}",
        gaps[0], gaps[1], gaps[2], gaps[3]
    ))
}

fn lagrangian() -> Outcome {
    let prob = instances::shipped();
    let pi0 = calibrated(&prob);
    let mut parts = Vec::new();
    for (eps, delta) in [(1e-2, 1e-2), (1e-1, 0.0), (1e-3, 1e-1)] {
        let reg = RegParams::new(eps, delta, pi0.sigma()).map_err(|e| e.to_string())?;
        let bar = lambda_bar(&prob, &pi0).map_err(|e| e.to_string())?;
        let r = optimal_block_radius(&prob, &reg, &pi0).map_err(|e| e.to_string())?;
        let mut margin = f64::INFINITY;
        for lam in [0.0, 0.5 * bar, bar] {
            let c = lagrangian_gap_check(&prob, &reg, &pi0, lam, r).map_err(|e| e.to_string())?;
            ensure(c.holds, || format!("({eps}, {delta}) lambda {lam}: lhs {} > rhs {}", c.lhs, c.rhs))?;
            margin = margin.min(c.rhs - c.lhs);
        }
        parts.push(format!("({eps}, {delta}) r {r:.2e} min margin {margin:.3e}"));
    }
    Ok(parts.join("; "))
}

fn radius() -> Outcome {
    let prob = instances::shipped();
    let sigma = calibrated(&prob).sigma();
    let mut parts = Vec::new();
    for ratio in [0.1, 0.5] {
        let c = radius_compare(&prob, ratio * sigma, sigma).map_err(|e| e.to_string())?;
        ensure(c.monotone && c.bound_holds, || {
            format!("delta/sigma {ratio}: diff {} bound {}", c.f_rho - c.f_shrunk, c.bound)
        })?;
        parts.push(format!("delta/sigma {ratio}: diff {:.4e} <= bound {:.4e}", c.f_rho - c.f_shrunk, c.bound));
    }
    Ok(parts.join("; "))
}

fn phi_consistency(log: &mut LambdaLog) -> Outcome {
    let (mut diff, mut resid) = (0.0f64, 0.0f64);
    for (k, prob) in instances::small_instances().iter().enumerate() {
        let pi0 = calibrated(prob);
        let bar = lambda_bar(prob, &pi0).map_err(|e| e.to_string())?;
        for (eps, delta) in [(0.1, 0.0), (0.05, 0.05), (0.01, 0.1)] {
            let reg = RegParams::new(eps, delta, pi0.sigma()).map_err(|e| e.to_string())?;
            let ent = solve_entropic(prob, &reg, &pi0).map_err(|e| e.to_string())?;
            let phi = solve_phi_dual(prob, eps, delta, &pi0, PhiSpec::Kl).map_err(|e| e.to_string())?;
            log.push((format!("kl instance {k} ({eps}, {delta})"), phi.lambda_star, bar));
            let r = phi.inner_residual.ok_or("no inner residual reported")?;
            diff = diff.max((phi.value - ent.dual.value).abs());
            resid = resid.max(r);
            ensure((phi.value - ent.dual.value).abs() <= 1e-4, || {
                format!("instance {k} ({eps}, {delta}): kl {} entropic {}", phi.value, ent.dual.value)
            })?;
            ensure(r < 1e-5, || format!("instance {k} ({eps}, {delta}): residual {r:.2e}"))?;
        }
    }
    Ok(format!("max |kl - entropic| {diff:.2e}, max inner residual {resid:.2e}"))
}

fn sinkhorn_oracle() -> Outcome {
    let grid = Arc::new(Grid::interval(0.0, 1.0, 5).map_err(|e| e.to_string())?);
    let spec = CostSpec::new(Norm::L1, 1.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut diff, mut viol) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let mut draw = || (0..5).map(|_| rng.gen_range(0.05..1.0)).collect::<Vec<f64>>();
        let a = DiscreteMeasure::normalized(grid.clone(), draw()).map_err(|e| e.to_string())?;
        let b = DiscreteMeasure::normalized(grid.clone(), draw()).map_err(|e| e.to_string())?;
        for eps in [0.1, 0.01] {
            let s = sinkhorn(&a, &b, &spec, eps).map_err(|e| e.to_string())?;
            let d = sinkhorn_dual_value(&a, &b, &spec, eps, &s.potential).map_err(|e| e.to_string())?;
            diff = diff.max((s.value - d).abs());
            viol = viol.max(s.marginal_error);
            ensure((s.value - d).abs() <= 1e-5 && s.marginal_error <= 1e-9, || {
                format!("eps {eps}: primal {} dual {d} marginal error {:.2e}", s.value, s.marginal_error)
            })?;
        }
    }
    Ok(format!("max |primal - dual| {diff:.2e}, max marginal violation {viol:.2e}"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// Runs every subcommand into `dir` and returns the artifacts by relative path.
fn cli_suite(dir: &Path, threads: usize) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let shipped = config("shipped.json");
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("entropic", vec!["solve".into(), shipped.display().to_string()]),
        ("kl", vec!["solve".into(), shipped.display().to_string(), "--method".into(), "phi".into(), "--phi".into(), "kl".into()]),
        ("chi2", vec!["solve".into(), shipped.display().to_string(), "--method".into(), "phi".into(), "--phi".into(), "chi2".into()]),
        ("cost_reg", vec!["solve".into(), shipped.display().to_string(), "--method".into(), "cost-reg".into()]),
        ("two_point", vec!["solve".into(), config("two_point.json").display().to_string()]),
        ("minimal", vec!["solve".into(), config("minimal.json").display().to_string()]),
        ("sweep", vec!["sweep".into(), shipped.display().to_string()]),
        ("verify", vec!["verify".into(), shipped.display().to_string()]),
        ("oracle", vec!["oracle".into(), shipped.display().to_string()]),
    ];
    for (name, mut args) in runs {
        args.push("--output".into());
        args.push(dir.join(name).display().to_string());
        let out = Command::new(env!("CARGO_BIN_EXE_wdro"))
            .args(&args)
            .env("WDRO_THREADS", threads.to_string())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("{name} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr))
        })?;
    }
    let gen = dir.join("generated.json");
    let out = Command::new(env!("CARGO_BIN_EXE_wdro"))
        .args(["gen-instance", "--seed", "5", "--points", "9", "--output"])
        .arg(&gen)
        .env("WDRO_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || "gen-instance failed".into())?;

    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("under dir").to_path_buf();
                files.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let one = cli_suite(&root.path().join("t1"), 1)?;
    let four = cli_suite(&root.path().join("t4"), 4)?;
    ensure(one.len() == four.len(), || format!("{} vs {} artifacts", one.len(), four.len()))?;
    for (path, bytes) in &one {
        ensure(four.get(path) == Some(bytes), || format!("{} differs", path.display()))?;
    }
    Ok(format!("{} artifacts byte-identical", one.len()))
}

fn main() {
    let mut log = LambdaLog::new();
    let results = vec![
        ("strong duality, unregularized", strong_duality_unreg()),
        ("strong duality, entropic", strong_duality_entropic(&mut log)),
        ("cost-regularization sandwich", sandwich()),
        ("approximation rate", approximation_rate(&mut log)),
        ("Lagrangian inequality", lagrangian()),
        ("radius comparison", radius()),
        ("phi-divergence consistency", phi_consistency(&mut log)),
        ("Sinkhorn oracle", sinkhorn_oracle()),
        ("determinism across thread counts", determinism()),
    ];
    // the dual bound is checked over every solve above
    let bound = ("dual bound lambda* <= lambda_bar", lambda_bounds(&log));
    let mut ordered: Vec<_> = results.into_iter().collect();
    ordered.insert(2, bound);

    let mut failed = 0;
    for (k, (name, outcome)) in ordered.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", ordered.len() - failed, ordered.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
