//! Least-squares fits of `log(quantity)` against `log(k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::record::{IterationRecord, Quantity};

/// Minimum number of usable rows for a fit.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub points: usize,
}

/// Fits over all records with `k >= k_min`.
pub fn fit_rate_slope(records: &[IterationRecord], quantity: Quantity, k_min: usize) -> Result<RateFit> {
    fit_rate_slope_window(records, quantity, k_min, usize::MAX)
}

/// Fits over records with `k_min <= k <= k_max`. Rows with a missing, nonpositive or
/// non-finite value are skipped.
pub fn fit_rate_slope_window(
    records: &[IterationRecord],
    quantity: Quantity,
    k_min: usize,
    k_max: usize,
) -> Result<RateFit> {
    let pts: Vec<(f64, f64, usize)> = records
        .iter()
        .filter(|r| r.k >= k_min.max(1) && r.k <= k_max)
        .filter_map(|r| quantity.of(r).map(|v| (r.k, v)))
        .filter(|&(_, v)| v > 0.0 && v.is_finite())
        .map(|(k, v)| ((k as f64).ln(), v.ln(), k))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { found: pts.len(), required: MIN_FIT_POINTS });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { found: 1, required: MIN_FIT_POINTS });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        k_min: pts.iter().map(|p| p.2).min().unwrap_or(0),
        k_max: pts.iter().map(|p| p.2).max().unwrap_or(0),
        points: pts.len(),
    })
}
