//! Plot-ready data series: CTC densities, per-script box statistics and
//! per-predictor regressions.

use serde::{Deserialize, Serialize};

use crate::stats::{ols_simple, sample_variance};

pub const DENSITY_POINTS: usize = 64;

/// Gaussian kernel density estimate with Silverman's bandwidth, evaluated at
/// `points` evenly spaced positions spanning three bandwidths past the data.
pub fn kde(values: &[f64], points: usize) -> Vec<(f64, f64)> {
    let n = values.len();
    if n == 0 || points == 0 {
        return Vec::new();
    }
    let sd = if n > 1 { sample_variance(values).sqrt() } else { 0.0 };
    let mut h = 1.06 * sd * (n as f64).powf(-0.2);
    if h.is_nan() || h <= 0.0 {
        h = values[0].abs().max(1.0) * 0.01;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let x = if points == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
            let d: f64 = values.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
            (x, d * norm)
        })
        .collect()
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some(BoxStats {
        n: s.len(),
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorRow {
    pub predictor: String,
    pub p_value: f64,
    pub r2: f64,
}

/// Regresses `response` on each named predictor; predictors that cannot be
/// fitted (constant, too few values) are left out.
pub fn regression_table(predictors: &[(&str, Vec<f64>)], response: &[f64]) -> Vec<PredictorRow> {
    predictors
        .iter()
        .filter_map(|(name, xs)| match ols_simple(xs, response) {
            Ok(r) => Some(PredictorRow {
                predictor: name.to_string(),
                p_value: r.p_slope,
                r2: r.r2,
            }),
            Err(e) => {
                log::warn!("skipping predictor {name}: {e}");
                None
            }
        })
        .collect()
}
