//! Finite grids, discrete probability measures and couplings.
//!
//! A [`Grid`] is a uniform Cartesian subdivision of a box in one or two
//! dimensions. Points are stored in lexicographic order, so in two dimensions
//! point `(i0, i1)` has flat index `i0 * n + i1`. Measures and couplings hold
//! an `Arc<Grid>` and are immutable once built.

use std::io::Read;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, WdroError};

/// Absolute tolerance on total mass and on marginal reproduction.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    bounds: Vec<(f64, f64)>,
    points_per_axis: usize,
    coords: Vec<f64>,
}

impl Grid {
    pub fn new(bounds: Vec<(f64, f64)>, points_per_axis: usize) -> Result<Self> {
        let dim = bounds.len();
        if !(1..=2).contains(&dim) {
            return Err(WdroError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if points_per_axis < 2 {
            return Err(WdroError::InvalidGrid(format!(
                "points_per_axis must be at least 2, got {points_per_axis}"
            )));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(WdroError::InvalidGrid(format!(
                    "axis {axis}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        let axis_values: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| {
                let h = (hi - lo) / (points_per_axis - 1) as f64;
                (0..points_per_axis)
                    .map(|k| if k + 1 == points_per_axis { hi } else { lo + k as f64 * h })
                    .collect()
            })
            .collect();
        let n = points_per_axis.pow(dim as u32);
        let mut coords = Vec::with_capacity(n * dim);
        for flat in 0..n {
            let mut rem = flat;
            let mut idx = vec![0; dim];
            for axis in (0..dim).rev() {
                idx[axis] = rem % points_per_axis;
                rem /= points_per_axis;
            }
            for axis in 0..dim {
                coords.push(axis_values[axis][idx[axis]]);
            }
        }
        Ok(Grid {
            bounds,
            points_per_axis,
            coords,
        })
    }

    /// Uniform grid on `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Grid::new(vec![(lo, hi)], points)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim())
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.points_per_axis - 1) as f64
    }

    /// Product of the per-axis spacings.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Lebesgue volume of the bounding box.
    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Per-axis indices of flat index `i`.
    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        let d = self.dim();
        let n = self.points_per_axis;
        let mut idx = vec![0; d];
        let mut rem = i;
        for axis in (0..d).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .fold(0, |acc, &k| acc * self.points_per_axis + k)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    /// Nearest grid point, ties going to the lexicographically smaller point.
    /// Returns `None` when `x` is outside the bounds.
    pub fn nearest_index(&self, x: &[f64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let last = self.points_per_axis - 1;
        let idx: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(axis, &v)| {
                let t = (v - self.bounds[axis].0) / self.spacing(axis);
                let below = t.floor();
                // exact half goes down
                let k = if t - below > 0.5 { below + 1.0 } else { below };
                (k.max(0.0) as usize).min(last)
            })
            .collect();
        Some(self.flat_index(&idx))
    }

    /// Flat indices of the axis-adjacent pairs `(i, j, axis)` with `j` one step
    /// above `i` along `axis`.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize, usize)> {
        let n = self.points_per_axis;
        let mut pairs = Vec::new();
        for i in 0..self.len() {
            let idx = self.multi_index(i);
            for axis in 0..self.dim() {
                if idx[axis] + 1 < n {
                    let mut up = idx.clone();
                    up[axis] += 1;
                    pairs.push((i, self.flat_index(&up), axis));
                }
            }
        }
        pairs
    }
}

fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if let Some(k) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(WdroError::InvalidMeasure(format!(
            "{what} weight {k} is {} (must be finite and >= 0)",
            weights[k]
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(WdroError::InvalidMeasure(format!(
            "{what} weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Probability weights on the points of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Arc<Grid>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Arc<Grid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(WdroError::LengthMismatch {
                expected: grid.len(),
                got: weights.len(),
            });
        }
        check_weights(&weights, "measure")?;
        Ok(DiscreteMeasure { grid, weights })
    }

    /// Divides nonnegative weights by their total. Fails if the total is zero.
    pub fn normalized(grid: Arc<Grid>, mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WdroError::InvalidMeasure(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(WdroError::InvalidMeasure("weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        DiscreteMeasure::new(grid, weights)
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        DiscreteMeasure {
            grid,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn dirac(grid: Arc<Grid>, i: usize) -> Self {
        let mut weights = vec![0.0; grid.len()];
        weights[i] = 1.0;
        DiscreteMeasure { grid, weights }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    /// `sum_i w_i * values_i`, summed left to right.
    pub fn expectation(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.weights.len() {
            return Err(WdroError::LengthMismatch {
                expected: self.weights.len(),
                got: values.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

/// Joint weights on grid x grid, stored row-major (`source * n + target`).
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    grid: Arc<Grid>,
    weights: Vec<f64>,
}

impl Coupling {
    pub fn new(grid: Arc<Grid>, weights: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if weights.len() != n * n {
            return Err(WdroError::LengthMismatch {
                expected: n * n,
                got: weights.len(),
            });
        }
        check_weights(&weights, "coupling")?;
        Ok(Coupling { grid, weights })
    }

    /// Like [`Coupling::new`], additionally requiring row sums to reproduce `first`.
    pub fn with_first_marginal(
        grid: Arc<Grid>,
        weights: Vec<f64>,
        first: &DiscreteMeasure,
    ) -> Result<Self> {
        if *first.grid() != grid {
            return Err(WdroError::GridMismatch);
        }
        let c = Coupling::new(grid, weights)?;
        let n = c.n();
        for i in 0..n {
            let row: f64 = c.row(i).iter().sum();
            if (row - first.weights()[i]).abs() > MASS_TOL {
                return Err(WdroError::InvalidMeasure(format!(
                    "row {i} sums to {row}, first marginal has {}",
                    first.weights()[i]
                )));
            }
        }
        Ok(c)
    }

    /// Builds a coupling from per-row conditional distributions scaled by `first`.
    /// Each conditional row must be nonnegative with positive total; it is
    /// normalized here.
    pub(crate) fn from_conditionals(first: &DiscreteMeasure, rows: Vec<Vec<f64>>) -> Self {
        let n = first.len();
        let mut weights = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            let pi = first.weights()[i];
            if pi == 0.0 {
                continue;
            }
            let total: f64 = row.iter().sum();
            for (j, v) in row.into_iter().enumerate() {
                weights[i * n + j] = pi * v / total;
            }
        }
        Coupling {
            grid: first.grid().clone(),
            weights,
        }
    }

    pub fn product(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<Self> {
        if p.grid() != q.grid() {
            return Err(WdroError::GridMismatch);
        }
        let n = p.len();
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                weights.push(p.weights()[i] * q.weights()[j]);
            }
        }
        Coupling::new(p.grid().clone(), weights)
    }

    /// Identity transport: all mass of `p` stays in place.
    pub fn diagonal(p: &DiscreteMeasure) -> Self {
        let n = p.len();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = p.weights()[i];
        }
        Coupling {
            grid: p.grid().clone(),
            weights,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.weights[i * n..(i + 1) * n]
    }

    pub fn marginal(&self, axis: Axis) -> DiscreteMeasure {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let w = self.weights[i * n + j];
                match axis {
                    Axis::First => out[i] += w,
                    Axis::Second => out[j] += w,
                }
            }
        }
        DiscreteMeasure {
            grid: self.grid.clone(),
            weights: out,
        }
    }

    /// `sum_{ij} w_ij * values_ij` for a row-major matrix of values.
    pub fn expectation(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.weights.len() {
            return Err(WdroError::LengthMismatch {
                expected: self.weights.len(),
                got: values.len(),
            });
        }
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Kullback-Leibler divergence `KL(num | base)` with `0 log 0 = 0`.
/// Returns `+inf` when `num` charges a cell where `base` vanishes.
pub fn kl_divergence(num: &Coupling, base: &Coupling) -> Result<f64> {
    if num.grid() != base.grid() {
        return Err(WdroError::GridMismatch);
    }
    let mut total = 0.0;
    for (&w, &b) in num.weights().iter().zip(base.weights()) {
        if w > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += w * (w / b).ln();
        }
    }
    Ok(total)
}

/// Snaps each sample to its nearest grid point and gives it weight `1/n`.
pub fn load_empirical(grid: Arc<Grid>, rows: &[Vec<f64>]) -> Result<DiscreteMeasure> {
    if rows.is_empty() {
        return Err(WdroError::InvalidMeasure("no samples".into()));
    }
    let mut counts = vec![0usize; grid.len()];
    for (row, x) in rows.iter().enumerate() {
        if x.len() != grid.dim() {
            return Err(WdroError::LengthMismatch {
                expected: grid.dim(),
                got: x.len(),
            });
        }
        let i = grid
            .nearest_index(x)
            .ok_or(WdroError::OutOfBounds { row })?;
        counts[i] += 1;
    }
    let n = rows.len() as f64;
    let weights = counts.into_iter().map(|c| c as f64 / n).collect();
    // counts sum to n exactly, so the division keeps the total within a few ulps
    DiscreteMeasure::new(grid, weights)
}

/// Parses `dim` comma-separated decimal fields per line. Lines starting with
/// `#` are skipped.
pub fn read_samples_csv<R: Read>(reader: R, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != dim {
            return Err(WdroError::InvalidMeasure(format!(
                "sample row {line}: expected {dim} fields, got {}",
                record.len()
            )));
        }
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| {
                    WdroError::InvalidMeasure(format!("sample row {line}: `{s}`: {e}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
