//! Norm-power transport costs and the Gaussian/Laplace-type reference coupling.
//!
//! The reference coupling has conditional weights
//! `pi0(y | x) ∝ exp(-c(x, y) / (2^(p-1) sigma))` over the grid points `y`,
//! and first marginal `P`. Uniform quadrature weights cancel in the
//! normalization, so only grid-point values enter.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};
use crate::measures::{Coupling, DiscreteMeasure, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => diffs.fold(0.0, f64::max),
        }
    }

    /// Lebesgue volume of the unit ball in `dim` dimensions.
    pub fn unit_ball_volume(self, dim: usize) -> f64 {
        match (self, dim) {
            (_, 1) => 2.0,
            (Norm::L1, 2) => 2.0,
            (Norm::L2, 2) => std::f64::consts::PI,
            (Norm::Linf, 2) => 4.0,
            _ => unreachable!("grids have dimension 1 or 2"),
        }
    }
}

/// `c(x, y) = ||x - y||^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub norm: Norm,
    pub p: f64,
}

impl CostSpec {
    pub fn new(norm: Norm, p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(WdroError::param("p", format!("exponent must be >= 1, got {p}")));
        }
        Ok(CostSpec { norm, p })
    }

    pub fn cost(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(WdroError::LengthMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.eval(x, y))
    }

    pub(crate) fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.norm.distance(x, y);
        if self.p == 1.0 {
            d
        } else {
            d.powf(self.p)
        }
    }

    /// Lipschitz constant of `y -> c(x, y)` on a set of the given diameter.
    pub fn lipschitz_on(&self, diameter: f64) -> f64 {
        self.p * diameter.powf(self.p - 1.0)
    }

    /// Denominator scale `2^(p-1)` of the reference exponent.
    pub fn reference_scale(&self) -> f64 {
        2f64.powf(self.p - 1.0)
    }
}

/// Row-major `n x n` matrix of `c(x_i, y_j)` over grid points.
pub fn cost_matrix(grid: &Grid, spec: &CostSpec) -> Vec<f64> {
    let n = grid.len();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(spec.eval(grid.point(i), grid.point(j)));
        }
    }
    out
}

/// Diameter of the grid's bounding box under `norm`.
pub fn diameter(grid: &Grid, norm: Norm) -> f64 {
    let lo: Vec<f64> = grid.bounds().iter().map(|b| b.0).collect();
    let hi: Vec<f64> = grid.bounds().iter().map(|b| b.1).collect();
    norm.distance(&lo, &hi)
}

/// Largest slope over axis-adjacent grid pairs. This underestimates the
/// Lipschitz constant of a general function; for one-dimensional grids it
/// is exact for the piecewise-linear interpolant of `values`.
pub fn lipschitz_estimate(grid: &Grid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(WdroError::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    Ok(grid
        .adjacent_pairs()
        .into_iter()
        .map(|(i, j, axis)| (values[j] - values[i]).abs() / grid.spacing(axis))
        .fold(0.0, f64::max))
}

/// Sum of `w_ij * c(x_i, y_j)`.
pub fn expected_cost(coupling: &Coupling, spec: &CostSpec) -> f64 {
    let grid = coupling.grid();
    let n = grid.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = coupling.get(i, j);
            if w > 0.0 {
                total += w * spec.eval(grid.point(i), grid.point(j));
            }
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct ReferenceCoupling {
    coupling: Coupling,
    /// Row-stochastic conditional weights, defined for every source row
    /// (including rows where `P` vanishes).
    conditional: Vec<f64>,
    sigma: f64,
    spec: CostSpec,
    first: DiscreteMeasure,
}

impl ReferenceCoupling {
    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn conditional_row(&self, i: usize) -> &[f64] {
        let n = self.first.len();
        &self.conditional[i * n..(i + 1) * n]
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn spec(&self) -> &CostSpec {
        &self.spec
    }

    pub fn first_marginal(&self) -> &DiscreteMeasure {
        &self.first
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.first.grid()
    }

    pub fn expected_cost(&self) -> f64 {
        expected_cost(&self.coupling, &self.spec)
    }
}

pub fn build_reference(p: &DiscreteMeasure, spec: &CostSpec, sigma: f64) -> Result<ReferenceCoupling> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(WdroError::param("sigma", format!("must be > 0, got {sigma}")));
    }
    let grid = p.grid();
    let n = grid.len();
    let scale = spec.reference_scale() * sigma;
    let mut conditional = Vec::with_capacity(n * n);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        // exponent is <= 0 with equality at j = i, so the row total is >= 1
        let row: Vec<f64> = (0..n)
            .map(|j| (-spec.eval(grid.point(i), grid.point(j)) / scale).exp())
            .collect();
        let total: f64 = row.iter().sum();
        conditional.extend(row.iter().map(|w| w / total));
        rows.push(row);
    }
    let coupling = Coupling::from_conditionals(p, rows);
    Ok(ReferenceCoupling {
        coupling,
        conditional,
        sigma,
        spec: *spec,
        first: p.clone(),
    })
}

/// Halves `sigma` from 1 until `E_{pi0} c <= rho / 2`. On a finite grid the
/// expected cost tends to zero as `sigma -> 0`, since the conditional mass
/// concentrates on the diagonal where the cost vanishes.
pub fn calibrate_sigma(p: &DiscreteMeasure, spec: &CostSpec, rho: f64) -> Result<f64> {
    const MAX_HALVINGS: usize = 200;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(WdroError::param("rho", format!("must be > 0, got {rho}")));
    }
    let mut sigma = 1.0;
    for _ in 0..=MAX_HALVINGS {
        if build_reference(p, spec, sigma)?.expected_cost() <= rho / 2.0 {
            return Ok(sigma);
        }
        sigma /= 2.0;
    }
    Err(WdroError::CalibrationFailed(MAX_HALVINGS))
}
