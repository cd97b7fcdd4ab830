//! Trend detection and model-comparison statistics.
//!
//! Three groups live here: the Mann-Kendall monotonic-trend test with tie
//! and continuity corrections, the nested-model F-test that gates adding
//! hindering terms, and goodness-of-fit summaries. The underlying special
//! functions are in [`special`].

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use special::{f_cdf, f_sf, ln_gamma, normal_cdf, regularized_incomplete_beta};

/// Errors from series validation and the statistical tests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series has {n} points, need at least {min}")]
    TooShort { n: usize, min: usize },
    #[error("time values must be strictly increasing (violated at index {index})")]
    NonIncreasingTime { index: usize },
    #[error("quantity must be positive and finite (violated at index {index})")]
    NonPositiveQ { index: usize },
    #[error("input contains a non-finite value: {what}")]
    NonFinite { what: &'static str },
    #[error("all values are tied, trend variance is zero")]
    ZeroVariance,
    #[error("lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need n > p_full for a residual degree of freedom (n = {n}, p_full = {p_full})")]
    DegenerateDof { n: usize, p_full: u32 },
    #[error("domain error: {what}")]
    Domain { what: &'static str },
}

/// An ordered sample of a positive quantity over time.
///
/// Spacing may be irregular; only strict time ordering and positivity are
/// required. This is the input type for fitting and trend gating.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    t: Vec<f64>,
    q: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series from (time, quantity) pairs, enforcing strictly
    /// increasing times, positive finite quantities, and length >= 2.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, StatsError> {
        let (t, q) = points.into_iter().unzip();
        Self::from_columns(t, q)
    }

    /// Same invariants as [`TimeSeries::new`], from parallel columns.
    pub fn from_columns(t: Vec<f64>, q: Vec<f64>) -> Result<Self, StatsError> {
        if t.len() != q.len() {
            return Err(StatsError::LengthMismatch { left: t.len(), right: q.len() });
        }
        if t.len() < 2 {
            return Err(StatsError::TooShort { n: t.len(), min: 2 });
        }
        for (i, &ti) in t.iter().enumerate() {
            if !ti.is_finite() {
                return Err(StatsError::NonFinite { what: "time value" });
            }
            if i > 0 && ti <= t[i - 1] {
                return Err(StatsError::NonIncreasingTime { index: i });
            }
        }
        for (i, &qi) in q.iter().enumerate() {
            if !(qi.is_finite() && qi > 0.0) {
                return Err(StatsError::NonPositiveQ { index: i });
            }
        }
        Ok(Self { t, q })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        // the constructor enforces len >= 2, so this is always false
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.q.iter().copied())
    }

    /// First and last time of the sample.
    pub fn span(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }
}

/// Direction a one-tailed trend test looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendDirection {
    Increasing,
    Decreasing,
}

/// Outcome of the Mann-Kendall test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub s: i64,
    pub var_s: f64,
    pub z: f64,
    pub p_one_tailed: f64,
    pub direction: TrendDirection,
    pub n: usize,
}

/// Mann-Kendall S statistic: the pairwise sign count
/// S = Σ_{i<j} sgn(v_j - v_i), with sgn(0) = 0.
pub fn mk_s(values: &[f64]) -> Result<i64, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooShort { n: values.len(), min: 2 });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { what: "trend sample" });
    }
    let mut s = 0i64;
    for (i, vi) in values.iter().enumerate() {
        for vj in &values[i + 1..] {
            s += match vj.partial_cmp(vi).unwrap() {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
            };
        }
    }
    Ok(s)
}

/// One-tailed Mann-Kendall trend test.
///
/// Uses the tie-corrected variance
/// var(S) = [n(n-1)(2n+5) - Σ_g t_g(t_g-1)(2t_g+5)] / 18
/// over tie groups of size t_g, the continuity-corrected normal score
/// Z = (S ∓ 1)/sqrt(var S), and the requested tail of Φ. Requires n >= 8,
/// below which the test has no detection power worth reporting.
pub fn mk_test(values: &[f64], direction: TrendDirection) -> Result<TrendResult, StatsError> {
    let n = values.len();
    if n < 8 {
        return Err(StatsError::TooShort { n, min: 8 });
    }
    let s = mk_s(values)?;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(StatsError::ZeroVariance);
    }
    let nf = n as f64;
    let mut var_s = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let mut run = 1usize;
    for i in 1..=n {
        if i < n && sorted[i] == sorted[i - 1] {
            run += 1;
            continue;
        }
        if run > 1 {
            let t = run as f64;
            var_s -= t * (t - 1.0) * (2.0 * t + 5.0);
        }
        run = 1;
    }
    var_s /= 18.0;

    let z = match s.cmp(&0) {
        std::cmp::Ordering::Greater => (s as f64 - 1.0) / var_s.sqrt(),
        std::cmp::Ordering::Less => (s as f64 + 1.0) / var_s.sqrt(),
        std::cmp::Ordering::Equal => 0.0,
    };
    let p_one_tailed = match direction {
        TrendDirection::Increasing => 1.0 - normal_cdf(z),
        TrendDirection::Decreasing => normal_cdf(z),
    };
    Ok(TrendResult { s, var_s, z, p_one_tailed, direction, n })
}

/// Finite-difference growth-rate series.
///
/// g_i = (ln Q_{i+1} - ln Q_i) / (t_{i+1} - t_i), placed at the interval
/// midpoint. Log differences make the estimator exact for pure
/// exponentials on any spacing. Returns n-1 points.
pub fn growth_rates(series: &TimeSeries) -> Vec<(f64, f64)> {
    let t = series.times();
    let q = series.values();
    (0..t.len() - 1)
        .map(|i| {
            let g = (q[i + 1] / q[i]).ln() / (t[i + 1] - t[i]);
            (0.5 * (t[i] + t[i + 1]), g)
        })
        .collect()
}

/// Outcome of a nested-model F-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    pub f: f64,
    pub df1: u32,
    pub df2: u32,
    pub p_value: f64,
    pub reject_null: bool,
    pub alpha: f64,
}

/// F-test for a full model against a restricted (nested) one.
///
/// F = [(rss_r - rss_f)/(p_f - p_r)] / [rss_f/(n - p_f)]. A full model
/// that fails to improve on the restricted fit clamps F to 0 rather than
/// erroring, since optimizer noise can leave rss_f marginally above
/// rss_r. A zero full-model residual with real improvement is treated as
/// an infinite statistic (p = 0).
pub fn f_test(
    rss_restricted: f64,
    rss_full: f64,
    p_restricted: u32,
    p_full: u32,
    n: usize,
    alpha: f64,
) -> Result<FTestResult, StatsError> {
    if !(rss_restricted.is_finite() && rss_full.is_finite()) {
        return Err(StatsError::NonFinite { what: "residual sum of squares" });
    }
    if rss_restricted < 0.0 || rss_full < 0.0 {
        return Err(StatsError::Domain { what: "residual sums of squares must be nonnegative" });
    }
    if p_full <= p_restricted {
        return Err(StatsError::Domain { what: "full model must have more parameters" });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Domain { what: "alpha must lie in (0, 1)" });
    }
    if n <= p_full as usize {
        return Err(StatsError::DegenerateDof { n, p_full });
    }
    let df1 = p_full - p_restricted;
    let df2 = (n - p_full as usize) as u32;
    let gain = (rss_restricted - rss_full).max(0.0) / df1 as f64;
    let noise = rss_full / df2 as f64;

    let (f, p_value) = if gain == 0.0 {
        (0.0, 1.0)
    } else if noise == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = gain / noise;
        (f, f_sf(f, df1, df2)?)
    };
    Ok(FTestResult { f, df1, df2, p_value, reject_null: p_value < alpha, alpha })
}

/// Goodness-of-fit summary in both linear and log scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub r2: f64,
    pub fvu: f64,
    /// Same statistics on ln Q; present only when data and predictions
    /// are all positive.
    pub r2_log: Option<f64>,
    pub fvu_log: Option<f64>,
}

/// Fraction of variance unexplained and R².
///
/// fvu = Σ(Q_i - Q̂_i)² / Σ(Q_i - Q̄)², r² = 1 - fvu. The log variant
/// applies the same formula to ln Q, which weights relative error evenly
/// across decades of growth.
pub fn r2_fvu(data: &[f64], predictions: &[f64]) -> Result<GoodnessOfFit, StatsError> {
    if data.len() != predictions.len() {
        return Err(StatsError::LengthMismatch { left: data.len(), right: predictions.len() });
    }
    if data.len() < 2 {
        return Err(StatsError::TooShort { n: data.len(), min: 2 });
    }
    if data.iter().chain(predictions).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { what: "fit sample" });
    }
    let (fvu, _) = fvu_of(data, predictions)?;
    let log_pair = if data.iter().chain(predictions).all(|&v| v > 0.0) {
        let ld: Vec<f64> = data.iter().map(|v| v.ln()).collect();
        let lp: Vec<f64> = predictions.iter().map(|v| v.ln()).collect();
        fvu_of(&ld, &lp).ok()
    } else {
        None
    };
    Ok(GoodnessOfFit {
        r2: 1.0 - fvu,
        fvu,
        r2_log: log_pair.map(|(f, _)| 1.0 - f),
        fvu_log: log_pair.map(|(f, _)| f),
    })
}

fn fvu_of(data: &[f64], predictions: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss_tot: f64 = data.iter().map(|&v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let ss_res: f64 = data
        .iter()
        .zip(predictions)
        .map(|(&v, &p)| (v - p) * (v - p))
        .sum();
    Ok((ss_res / ss_tot, ss_tot))
}

#[cfg(test)]
mod tests;
