//! Closed-form objectives evaluated on a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WdroError};
use crate::measures::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Objective {
    /// `<coeffs, y> + intercept`.
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    /// `scale * |y - center|_2^2 + offset`.
    Quadratic {
        center: Vec<f64>,
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude * sin(frequency * sum_k y_k + phase)`.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `scale * |y - center|_1 + offset`.
    Abs {
        center: Vec<f64>,
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Linear interpolation in the first coordinate through `[x, value]`
    /// knots, constant outside the knot range.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    /// One value per grid point, in grid order.
    Tabulated { values: Vec<f64> },
}

fn check_dim(name: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(WdroError::param(
            name,
            format!("has {} entries, grid dimension is {dim}", v.len()),
        ));
    }
    Ok(())
}

fn interpolate(knots: &[[f64; 2]], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let k = knots.partition_point(|kn| kn[0] <= x);
    let [x0, y0] = knots[k - 1];
    let [x1, y1] = knots[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl Objective {
    pub fn evaluate(&self, grid: &Grid) -> Result<Vec<f64>> {
        let d = grid.dim();
        let values: Vec<f64> = match self {
            Objective::Linear { coeffs, intercept } => {
                check_dim("coeffs", coeffs, d)?;
                grid.points()
                    .map(|y| intercept + y.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            }
            Objective::Quadratic { center, scale, offset } => {
                check_dim("center", center, d)?;
                grid.points()
                    .map(|y| offset + scale * y.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                    .collect()
            }
            Objective::Sine { amplitude, frequency, phase } => grid
                .points()
                .map(|y| amplitude * (frequency * y.iter().sum::<f64>() + phase).sin())
                .collect(),
            Objective::Abs { center, scale, offset } => {
                check_dim("center", center, d)?;
                grid.points()
                    .map(|y| offset + scale * y.iter().zip(center).map(|(a, b)| (a - b).abs()).sum::<f64>())
                    .collect()
            }
            Objective::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(WdroError::param("knots", "need at least one knot"));
                }
                if knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                    return Err(WdroError::param("knots", "x coordinates must be strictly increasing"));
                }
                grid.points().map(|y| interpolate(knots, y[0])).collect()
            }
            Objective::Tabulated { values } => {
                if values.len() != grid.len() {
                    return Err(WdroError::LengthMismatch {
                        expected: grid.len(),
                        got: values.len(),
                    });
                }
                values.clone()
            }
        };
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(WdroError::param("objective", format!("value at point {k} is not finite")));
        }
        Ok(values)
    }
}
