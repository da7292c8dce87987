use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation; the result does not depend on how the
/// values were produced, only on their order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and its standard error (zero for a single value).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// OLS standard error of the slope; zero for two points.
    pub slope_se: f64,
}

/// Ordinary least squares of `ln value` on `ln n`.
pub fn fit_log_log_slope(pairs: &[(f64, f64)]) -> Result<LogLogFit> {
    if pairs.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two points"));
    }
    if let Some(&(n, v)) = pairs
        .iter()
        .find(|(n, v)| !(*n > 0.0 && *v > 0.0 && n.is_finite() && v.is_finite()))
    {
        return Err(Error::invalid(format!(
            "log-log fit needs positive finite values, got ({n}, {v})"
        )));
    }
    let m = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let xbar = pairwise_sum(&xs) / m;
    let ybar = pairwise_sum(&ys) / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs at least two distinct n"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let slope_se = if pairs.len() > 2 {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogLogFit {
        slope,
        intercept,
        slope_se,
    })
}

/// Threshold `t` such that rejecting when `stat ≥ t` rejects at most a
/// fraction `a` of `null_stats`.
pub fn empirical_threshold(null_stats: &[f64], a: f64) -> f64 {
    let mut sorted = null_stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((1.0 - a) * sorted.len() as f64).ceil() as usize;
    sorted.get(idx).copied().unwrap_or(f64::INFINITY)
}
