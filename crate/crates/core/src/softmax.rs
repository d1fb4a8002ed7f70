//! Max-shifted log-sum-exp reductions.

/// `log sum_k exp(x_k)`; `-inf` for an empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Largest `values[k]` among cells with positive weight, with its index
/// (smallest index on ties). `None` if no weight is positive.
pub fn weighted_max(weights: &[f64], values: &[f64]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (k, (&w, &v)) in weights.iter().zip(values).enumerate() {
        if w > 0.0 && best.map_or(true, |(b, _)| v > b) {
            best = Some((v, k));
        }
    }
    best
}

/// Smoothed maximum `beta * log sum_k w_k exp(v_k / beta)` over cells with
/// `w_k > 0`, evaluated as `m + beta * log sum w exp((v - m) / beta)` with
/// `m` the largest supported value. Weights are assumed to sum to one, so the
/// result lies in `[sum w v, m]`.
pub fn soft_max(weights: &[f64], values: &[f64], beta: f64) -> f64 {
    let (m, _) = weighted_max(weights, values).expect("row has no positive weight");
    let s: f64 = weights
        .iter()
        .zip(values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w * ((v - m) / beta).exp())
        .sum();
    m + beta * s.ln()
}

/// Exponential tilt `w_k exp((v_k - m) / beta)` normalized to sum to one.
pub fn tilt(weights: &[f64], values: &[f64], beta: f64) -> Vec<f64> {
    let (m, _) = weighted_max(weights, values).expect("row has no positive weight");
    let mut out: Vec<f64> = weights
        .iter()
        .zip(values)
        .map(|(&w, &v)| if w > 0.0 { w * ((v - m) / beta).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}
