//! Reproducible problem instances used by tests, benchmarks and the CLI.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{CostSpec, Norm};
use crate::dual::ProblemSpec;
use crate::measures::{DiscreteMeasure, Grid};

/// Two points `{0, 1}`, `P = delta_0`, `f(y) = y`, `c = |x - y|`, `rho = 0.3`.
/// Optimal value `0.3`, attained by moving mass `0.3` to `y = 1`; `lambda* = 1`.
pub fn two_point() -> ProblemSpec {
    let g = Arc::new(Grid::interval(0.0, 1.0, 2).expect("valid grid"));
    ProblemSpec::new(
        DiscreteMeasure::dirac(g, 0),
        vec![0.0, 1.0],
        CostSpec::new(Norm::L1, 1.0).expect("p >= 1"),
        0.3,
    )
    .expect("valid problem")
}

/// Random instance on an `n`-point grid of `[0, 1]`: sparse `P`, rough `f`
/// in `[-1, 1]`, `p` in `{1, 2}`, `rho` in `[0.02, 0.3]`.
pub fn random_problem(seed: u64, n: usize) -> ProblemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Arc::new(Grid::interval(0.0, 1.0, n).expect("n >= 2"));
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.7) { rng.gen_range(0.05..1.0) } else { 0.0 })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let p = DiscreteMeasure::normalized(g, w).expect("positive mass");
    let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let exponent = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
    let rho = rng.gen_range(0.02..0.3);
    ProblemSpec::new(p, f, CostSpec::new(Norm::L1, exponent).expect("p >= 1"), rho).expect("valid problem")
}

/// Grid size of [`shipped`].
pub const SHIPPED_POINTS: usize = 33;

/// 33-point grid of `[0, 1]`, uniform `P`, `f(y) = 1 - 4 (y - 1/2)^2`,
/// `c = |x - y|`, `rho = 0.05`. Used with `sigma` from
/// [`calibrate_sigma`](crate::cost::calibrate_sigma).
pub fn shipped() -> ProblemSpec {
    let g = Arc::new(Grid::interval(0.0, 1.0, SHIPPED_POINTS).expect("valid grid"));
    let f = crate::objective::Objective::Quadratic {
        center: vec![0.5],
        scale: -4.0,
        offset: 1.0,
    }
    .evaluate(&g)
    .expect("1-d center");
    ProblemSpec::new(
        DiscreteMeasure::uniform(g),
        f,
        CostSpec::new(Norm::L1, 1.0).expect("p >= 1"),
        0.05,
    )
    .expect("valid problem")
}

/// Five small random instances (7 points each).
pub fn small_instances() -> Vec<ProblemSpec> {
    (0..5).map(|seed| random_problem(1000 + seed, 7)).collect()
}
