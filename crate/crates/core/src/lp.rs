//! Dense two-phase simplex for the small linear programs behind the oracles.
//!
//! Problems are `max c'x` subject to rows `a'x (<=|=|>=) b` and `x >= 0`.
//! Pivoting uses the largest reduced cost and falls back to Bland's rule
//! after a run of degenerate pivots.

use crate::error::{Result, WdroError};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn maximize(&self) -> Result<LpSolution> {
        Tableau::build(self)?.solve(self)
    }
}

struct Tableau {
    m: usize,
    /// columns: structural, slack/surplus, artificial, rhs
    width: usize,
    n_struct: usize,
    art_start: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self> {
        let n = lp.objective.len();
        let m = lp.constraints.len();
        for (k, c) in lp.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(WdroError::Lp(format!(
                    "constraint {k} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        // normalize to rhs >= 0
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let art_start = n + n_slack;
        let width = art_start + n_art + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, art_start);
        for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            let row = &mut data[r * width..(r + 1) * width];
            row[..n].copy_from_slice(coeffs);
            row[width - 1] = *rhs;
            match rel {
                Relation::Le => {
                    row[s] = 1.0;
                    basis[r] = s;
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[a] = 1.0;
                    basis[r] = a;
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = 1.0;
                    basis[r] = a;
                    a += 1;
                }
            }
        }
        Ok(Tableau {
            m,
            width,
            n_struct: n,
            art_start,
            data,
            basis,
            pivots: 0,
        })
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize, cost: &mut [f64]) {
        let w = self.width;
        let p = self.data[row * w + col];
        for v in &mut self.data[row * w..(row + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * w..(row + 1) * w].to_vec();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let factor = self.data[r * w + col];
            if factor != 0.0 {
                for (v, pv) in self.data[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                self.data[r * w + col] = 0.0;
            }
        }
        let factor = cost[col];
        if factor != 0.0 {
            for (v, pv) in cost.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            cost[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced-cost row for maximizing `obj` (length `width`, last entry is
    /// minus the current objective value).
    fn reduced_costs(&self, obj: &[f64]) -> Vec<f64> {
        let mut cost = obj.to_vec();
        for r in 0..self.m {
            let cb = obj[self.basis[r]];
            if cb != 0.0 {
                for c in 0..self.width {
                    cost[c] -= cb * self.at(r, c);
                }
            }
        }
        cost
    }

    fn run(&mut self, cost: &mut [f64], allowed: usize) -> Result<()> {
        let mut degenerate = 0usize;
        let limit = 50_000 + 100 * (self.m + allowed);
        loop {
            if self.pivots > limit {
                return Err(WdroError::Lp("pivot limit exceeded".into()));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = PIVOT_TOL;
            for c in 0..allowed {
                if cost[c] > best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = cost[c];
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(WdroError::Lp("objective is unbounded".into()));
            };
            if ratio.abs() < 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col, cost);
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let w = self.width;
        let n_art = w - 1 - self.art_start;
        if n_art > 0 {
            let mut phase1 = vec![0.0; w];
            for c in self.art_start..w - 1 {
                phase1[c] = -1.0;
            }
            let mut cost = self.reduced_costs(&phase1);
            self.run(&mut cost, w - 1)?;
            let infeas: f64 = (0..self.m)
                .filter(|&r| self.basis[r] >= self.art_start)
                .map(|r| self.rhs(r))
                .sum();
            if infeas > FEAS_TOL {
                return Err(WdroError::Lp(format!(
                    "infeasible (phase-one residual {infeas:.3e})"
                )));
            }
            // drive zero-level artificials out where possible; rows with no
            // usable entry are redundant and keep their artificial at zero
            for r in 0..self.m {
                if self.basis[r] >= self.art_start {
                    if let Some(c) =
                        (0..self.art_start).find(|&c| self.at(r, c).abs() > PIVOT_TOL)
                    {
                        let mut dummy = vec![0.0; w];
                        self.pivot(r, c, &mut dummy);
                    }
                }
            }
        }
        let mut obj = vec![0.0; w];
        obj[..self.n_struct].copy_from_slice(&lp.objective);
        let mut cost = self.reduced_costs(&obj);
        self.run(&mut cost, self.art_start)?;

        let mut x = vec![0.0; self.n_struct];
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.n_struct {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            value,
            pivots: self.pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![3.0, 5.0]);
        lp.push(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.push(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.push(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.maximize().unwrap();
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y (max -x - y), x + y >= 2, x - y = 0
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.push(vec![1.0, 1.0], Relation::Ge, 2.0);
        lp.push(vec![1.0, -1.0], Relation::Eq, 0.0);
        let s = lp.maximize().unwrap();
        assert!((s.value + 2.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        // transport 2x2 with all four marginal rows (one redundant)
        let mut lp = LinearProgram::new(vec![-0.0, -1.0, -1.0, -0.0]);
        lp.push(vec![1.0, 1.0, 0.0, 0.0], Relation::Eq, 0.5);
        lp.push(vec![0.0, 0.0, 1.0, 1.0], Relation::Eq, 0.5);
        lp.push(vec![1.0, 0.0, 1.0, 0.0], Relation::Eq, 0.2);
        lp.push(vec![0.0, 1.0, 0.0, 1.0], Relation::Eq, 0.8);
        let s = lp.maximize().unwrap();
        assert!((s.value + 0.3).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.push(vec![1.0], Relation::Le, 1.0);
        lp.push(vec![1.0], Relation::Ge, 2.0);
        assert!(lp.maximize().is_err());
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.push(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert!(lp.maximize().is_err());
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // max -x with -x <= -3  (x >= 3)
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.push(vec![-1.0], Relation::Le, -3.0);
        let s = lp.maximize().unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }
}
