//! Significance tests: simple OLS, paired t-test, variance-ratio F-test,
//! Mann-Whitney U and Bonferroni adjustment.

mod special;

use serde::{Deserialize, Serialize};

pub use special::{
    erfc, f_cdf, f_sf, f_two_sided, ln_gamma, normal_cdf, normal_two_sided, reg_inc_beta, t_cdf,
    t_two_sided,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub p_slope: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    pub f_stat: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    pub u_stat: f64,
    pub p_two_sided: f64,
    pub p_adjusted: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn ols_simple(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ConstantPredictor);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let dof = (n - 2) as f64;
    let (r2, p_slope) = if syy == 0.0 {
        (0.0, 1.0)
    } else {
        let r2 = (1.0 - ss_res / syy).clamp(0.0, 1.0);
        let se = (ss_res / dof / sxx).sqrt();
        let p = if se == 0.0 {
            0.0
        } else {
            t_two_sided(slope / se, dof)
        };
        (r2, p)
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / dof;
    Ok(RegressionResult {
        slope,
        intercept,
        r2,
        adj_r2,
        p_slope,
        n,
    })
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: a.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let var = sample_variance(&d);
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let n = d.len() as f64;
    let mean_diff = mean(&d);
    let t_stat = mean_diff / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTestResult {
        t_stat,
        df,
        p_two_sided: t_two_sided(t_stat, df),
        mean_diff,
    })
}

/// F = var(a) / var(b) with a two-sided p from the doubled smaller tail.
pub fn variance_ratio_test(a: &[f64], b: &[f64]) -> Result<FTestResult> {
    for g in [a, b] {
        if g.len() < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: g.len() });
        }
    }
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let f_stat = va / vb;
    let (df1, df2) = (a.len() as f64 - 1.0, b.len() as f64 - 1.0);
    Ok(FTestResult {
        f_stat,
        df1,
        df2,
        p_two_sided: f_two_sided(f_stat, df1, df2),
    })
}

/// Largest group size for which the exact null distribution is used.
pub const MWU_EXACT_MAX: usize = 8;

/// Mann-Whitney U of `a` against `b` (midranks for ties).
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let (n1, n2) = (a.len(), b.len());
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = pooled.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += pooled[i..=j].iter().filter(|p| p.1).count() as f64 * midrank;
        i = j + 1;
    }
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let (f1, f2) = (n1 as f64, n2 as f64);

    let p = if n1.min(n2) <= MWU_EXACT_MAX && tie_term == 0.0 {
        let dist = exact_u_distribution(n1, n2);
        let k = u.round() as usize;
        let lower: f64 = dist[..=k].iter().sum();
        let upper: f64 = dist[k..].iter().sum();
        (2.0 * lower.min(upper)).min(1.0)
    } else {
        let mu = f1 * f2 / 2.0;
        let nn = f1 + f2;
        let var = f1 * f2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
            normal_two_sided(z)
        }
    };
    Ok(MwuResult {
        u_stat: u,
        p_two_sided: p,
        p_adjusted: None,
    })
}

/// Null probabilities P(U = u), u = 0..=n1*n2, for untied samples.
fn exact_u_distribution(n1: usize, n2: usize) -> Vec<f64> {
    // ways[k][s]: choices of k of the first m ranks whose (rank - position) sum to s
    let max_u = n1 * n2;
    let mut ways = vec![vec![0.0f64; max_u + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for m in 1..=n1 + n2 {
        for k in (1..=n1.min(m)).rev() {
            // the k-th chosen element sits at rank m, contributing m - k to U
            let shift = m - k;
            if shift > n2 {
                continue;
            }
            for s in (shift..=max_u).rev() {
                let add = ways[k - 1][s - shift];
                if add != 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    ways[n1].iter().map(|w| w / total).collect()
}

/// Multiplies every p-value by the number of tests. Not capped at 1.
pub fn bonferroni(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len() as f64;
    p_values.iter().map(|p| p * m).collect()
}

pub fn bonferroni_capped(p_values: &[f64]) -> Vec<f64> {
    bonferroni(p_values).into_iter().map(|p| p.min(1.0)).collect()
}
