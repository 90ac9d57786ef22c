//! Power-law compression curves `ctc(v) = a * v^(-b) + c`, their inversion to
//! per-language vocabulary sizes, and RMSE validation of the resulting plans.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planned vocabularies are multiples of this.
pub const VOCAB_STEP: usize = 128;
pub const DEFAULT_MIN_VOCAB: usize = 8192;
pub const DEFAULT_MAX_VOCAB: usize = 262_144;

const GRID_STEPS: usize = 400;
const GOLDEN_ITERS: usize = 200;
const LM_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub language_tag: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub points: Vec<(usize, f64)>,
    pub rmse_fit: f64,
    pub r2: f64,
}

impl PowerLawFit {
    pub fn from_params(language_tag: &str, a: f64, b: f64, c: f64) -> Self {
        Self {
            language_tag: language_tag.to_string(),
            a,
            b,
            c,
            points: Vec::new(),
            rmse_fit: 0.0,
            r2: 1.0,
        }
    }

    pub fn predict(&self, vocab: f64) -> f64 {
        self.a * vocab.powf(-self.b) + self.c
    }

    /// Exact (unrounded) vocabulary at which the curve reaches `target`, if any.
    pub fn inverse(&self, target: f64) -> Option<f64> {
        if target <= self.c {
            return None;
        }
        Some(((target - self.c) / self.a).powf(-1.0 / self.b))
    }
}

pub fn predict_ctc(fit: &PowerLawFit, vocab: usize) -> f64 {
    fit.predict(vocab as f64)
}

/// Decreasing isotonic regression (pool adjacent violators).
fn decreasing_hull(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

struct Data {
    ln_v: Vec<f64>,
    y: Vec<f64>,
    /// log of the geometric-mean vocabulary; parameters are fitted around it
    ln_v0: f64,
}

impl Data {
    fn sse(&self, amp: f64, b: f64, c: f64) -> f64 {
        self.ln_v
            .iter()
            .zip(&self.y)
            .map(|(&lv, &y)| {
                let r = amp * (-b * (lv - self.ln_v0)).exp() + c - y;
                r * r
            })
            .sum()
    }

    /// Least squares line of ln(y - c) against ln v; returns (amp, b) at v0.
    fn log_linear(&self, c: f64) -> Option<(f64, f64)> {
        let n = self.y.len() as f64;
        let xs: Vec<f64> = self.ln_v.iter().map(|lv| lv - self.ln_v0).collect();
        let ys: Vec<f64> = self.y.iter().map(|&y| (y - c).ln()).collect();
        if ys.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let b = -slope;
        if b.is_nan() || b <= 0.0 {
            return None;
        }
        Some((intercept.exp(), b))
    }

    fn profile(&self, c: f64) -> f64 {
        match self.log_linear(c) {
            Some((amp, b)) => self.sse(amp, b, c),
            None => f64::INFINITY,
        }
    }
}

/// Fits `a * v^(-b) + c` by least squares.
///
/// The asymptote is located by a grid plus golden-section search over
/// `c in [0, min ctc)`, solving `(a, b)` in log space for each candidate, and the
/// three parameters are then refined jointly with damped Gauss-Newton steps.
pub fn fit_power_law(language_tag: &str, points: &[(usize, f64)]) -> Result<PowerLawFit> {
    let mut sorted: Vec<(usize, f64)> = points.to_vec();
    sorted.sort_by_key(|p| p.0);
    let mut distinct = sorted.iter().map(|p| p.0).collect::<Vec<_>>();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: distinct.len(),
        });
    }
    if sorted.iter().any(|p| p.1.is_nan() || p.1 <= 0.0 || p.0 == 0) {
        return Err(Error::DomainError("vocab sizes and CTCs must be positive".into()));
    }
    let raw_y: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let mut y = decreasing_hull(&raw_y);
    if y != raw_y {
        warn!("{language_tag}: CTC is not decreasing in vocabulary size, fitting the monotone hull");
    }
    if y.first() == y.last() {
        // flat curve: nudge so a positive exponent exists
        let top = y[0];
        y = y.iter().enumerate().map(|(i, _)| top * (1.0 + 1e-9 * (y.len() - i) as f64)).collect();
    }

    let ln_v: Vec<f64> = sorted.iter().map(|p| (p.0 as f64).ln()).collect();
    let ln_v0 = ln_v.iter().sum::<f64>() / ln_v.len() as f64;
    let data = Data { ln_v, y, ln_v0 };
    let y_min = data.y.iter().copied().fold(f64::INFINITY, f64::min);
    let c_hi = y_min * (1.0 - 1e-9);

    // coarse scan
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..=GRID_STEPS {
        let c = c_hi * i as f64 / GRID_STEPS as f64;
        let s = data.profile(c);
        if s < best {
            best = s;
            best_i = i;
        }
    }
    let step = c_hi / GRID_STEPS as f64;
    let mut lo = (best_i as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best_i as f64 + 1.0) * step).min(c_hi);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..GOLDEN_ITERS {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if data.profile(m1) <= data.profile(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let c0 = (lo + hi) / 2.0;
    let c0 = if data.profile(c0) <= best { c0 } else { best_i as f64 * step };
    let (amp0, b0) = data
        .log_linear(c0)
        .ok_or_else(|| Error::DomainError("could not initialise the power-law fit".into()))?;

    let (amp, b, c) = refine(&data, amp0.ln(), b0, c0, c_hi);
    let a = amp * (b * data.ln_v0).exp();

    let residuals: Vec<f64> = sorted
        .iter()
        .map(|&(v, obs)| a * (v as f64).powf(-b) + c - obs)
        .collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = raw_y.iter().sum::<f64>() / raw_y.len() as f64;
    let sst: f64 = raw_y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(PowerLawFit {
        language_tag: language_tag.to_string(),
        a,
        b,
        c,
        points: sorted,
        rmse_fit: (sse / residuals.len() as f64).sqrt(),
        r2: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
    })
}

/// Levenberg-Marquardt on (ln amp, b, c), keeping b > 0 and 0 <= c <= c_hi.
fn refine(data: &Data, mut ln_amp: f64, mut b: f64, mut c: f64, c_hi: f64) -> (f64, f64, f64) {
    let mut lambda = 1e-3;
    let mut cost = data.sse(ln_amp.exp(), b, c);
    for _ in 0..LM_ITERS {
        let amp = ln_amp.exp();
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&lv, &y) in data.ln_v.iter().zip(&data.y) {
            let x = lv - data.ln_v0;
            let term = amp * (-b * x).exp();
            let r = term + c - y;
            let j = [term, -term * x, 1.0];
            for p in 0..3 {
                jtr[p] += j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for (p, row) in m.iter_mut().enumerate() {
                row[p] += lambda * (jtj[p][p].max(1e-30));
            }
            let Some(step) = solve3(m, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nb, nc) = (ln_amp + step[0], b + step[1], c + step[2]);
            if nb > 0.0 && (0.0..=c_hi).contains(&nc) {
                let new_cost = data.sse(na.exp(), nb, nc);
                if new_cost < cost {
                    let rel = (cost - new_cost) / cost.max(1e-300);
                    ln_amp = na;
                    b = nb;
                    c = nc;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (ln_amp.exp(), b, c)
}

fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn round_to_step(vocab: f64) -> usize {
    ((vocab / VOCAB_STEP as f64).round() as usize) * VOCAB_STEP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabBounds {
    pub min_vocab: usize,
    pub max_vocab: usize,
}

impl Default for VocabBounds {
    fn default() -> Self {
        Self {
            min_vocab: DEFAULT_MIN_VOCAB,
            max_vocab: DEFAULT_MAX_VOCAB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clamp {
    None,
    Floor,
    Ceil,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalVocabEntry {
    pub language_tag: String,
    pub target_ctc: u64,
    pub planned_vocab: usize,
    pub predicted_ctc: f64,
    pub clamped: Clamp,
}

impl OptimalVocabEntry {
    /// CSV form of the clamp column: `none`, `floor_<vocab>` or `ceil_<vocab>`.
    pub fn clamp_label(&self) -> String {
        match self.clamped {
            Clamp::None => "none".to_string(),
            Clamp::Floor => format!("floor_{}", self.planned_vocab),
            Clamp::Ceil => format!("ceil_{}", self.planned_vocab),
        }
    }

    pub fn parse_clamp(label: &str) -> Result<Clamp> {
        if label == "none" {
            Ok(Clamp::None)
        } else if label.starts_with("floor_") {
            Ok(Clamp::Floor)
        } else if label.starts_with("ceil_") {
            Ok(Clamp::Ceil)
        } else {
            Err(Error::InvalidConfig(format!("bad clamp label {label:?}")))
        }
    }
}

/// Plans the vocabulary at which `fit` reaches `target_ctc`.
///
/// Targets at or below the curve at the largest grid size fall back to that
/// size with its observed CTC; targets at or above the curve at the smallest
/// grid size fall back to the smallest size likewise.
pub fn invert_for_target(
    fit: &PowerLawFit,
    target_ctc: u64,
    observed: &BTreeMap<usize, f64>,
    bounds: VocabBounds,
) -> Result<OptimalVocabEntry> {
    let obs_at = |v: usize| observed.get(&v).copied().ok_or(Error::MissingEndpoints(v));
    let at_max = obs_at(bounds.max_vocab)?;
    let at_min = obs_at(bounds.min_vocab)?;
    let target = target_ctc as f64;
    let entry = |planned_vocab, predicted_ctc, clamped| OptimalVocabEntry {
        language_tag: fit.language_tag.clone(),
        target_ctc,
        planned_vocab,
        predicted_ctc,
        clamped,
    };
    if target <= fit.predict(bounds.max_vocab as f64) {
        return Ok(entry(bounds.max_vocab, at_max, Clamp::Ceil));
    }
    if target >= fit.predict(bounds.min_vocab as f64) {
        return Ok(entry(bounds.min_vocab, at_min, Clamp::Floor));
    }
    let exact = fit.inverse(target).expect("target above asymptote");
    let planned = round_to_step(exact).clamp(bounds.min_vocab, bounds.max_vocab);
    Ok(entry(planned, fit.predict(planned as f64), Clamp::None))
}

pub fn plan_optimal_vocab(
    fits: &[PowerLawFit],
    targets: &[u64],
    observed: &HashMap<String, BTreeMap<usize, f64>>,
    bounds: VocabBounds,
) -> Result<Vec<OptimalVocabEntry>> {
    let empty = BTreeMap::new();
    let mut plan = Vec::with_capacity(fits.len() * targets.len());
    for fit in fits {
        let obs = observed.get(&fit.language_tag).unwrap_or(&empty);
        for &t in targets {
            plan.push(invert_for_target(fit, t, obs, bounds)?);
        }
    }
    Ok(plan)
}

/// `start, start + step, ..., end` inclusive.
pub fn target_grid(start: u64, end: u64, step: u64) -> Vec<u64> {
    (start..=end).step_by(step as usize).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanValidation {
    /// (target, rmse, entries)
    pub per_target: Vec<(u64, f64, usize)>,
    pub overall: f64,
}

/// RMSE between planned predictions and measured CTCs, per target and overall.
pub fn validate_plan(
    plan: &[OptimalVocabEntry],
    measured: &HashMap<(String, u64), f64>,
) -> Result<PlanValidation> {
    let mut by_target: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    let (mut total, mut n) = (0.0, 0usize);
    for e in plan {
        let m = measured
            .get(&(e.language_tag.clone(), e.target_ctc))
            .ok_or_else(|| Error::MissingMeasurement {
                language: e.language_tag.clone(),
                target: e.target_ctc as f64,
            })?;
        let sq = (e.predicted_ctc - m).powi(2);
        let slot = by_target.entry(e.target_ctc).or_default();
        slot.0 += sq;
        slot.1 += 1;
        total += sq;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    Ok(PlanValidation {
        per_target: by_target
            .into_iter()
            .map(|(t, (s, k))| (t, (s / k as f64).sqrt(), k))
            .collect(),
        overall: (total / n as f64).sqrt(),
    })
}
