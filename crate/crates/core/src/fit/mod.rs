//! Model fitting and statistically gated family selection.
//!
//! A fitted model maps clock time onto the dimensionless profile:
//! Q(t) = Q_h h(g_u (t - t_h)). Fitting minimizes the equal-relative-weight
//! residual Σ(Q̂/Q - 1)² with a deterministic multi-start Nelder-Mead
//! search. Family selection runs in two stages: a Mann-Kendall gate
//! establishes that Q rises while its growth rate falls, then an F-test
//! ladder picks the minimal hindering model and extends it one term at a
//! time for as long as each added term is statistically justified.

mod optimizer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{
    self, solve, GrowthFamily, HinderingWeights, KernelError, SolverSettings,
};
use crate::stats::{
    self, FTestResult, StatsError, TimeSeries, TrendDirection, TrendResult,
};
use optimizer::nelder_mead;

/// Errors from fitting and selection.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("logistic hindering ratio must exceed 1/2, got {q_h}")]
    LogisticDomain { q_h: f64 },
    #[error("invalid model: {what}")]
    InvalidModel { what: &'static str },
    #[error("no optimizer restart converged")]
    OptimizerFailure,
    #[error("growth preconditions not met (Q must rise, its rate must fall)")]
    GateFailed(Box<GateResult>),
    #[error("no candidate families enabled")]
    NoCandidates,
}

/// A dimensionless profile placed on physical axes.
///
/// `t_h` is the clock time at which the curve crosses Q = Q_h; the
/// dimensionless position of any time is x = g_u (t - t_h). Storing the
/// crossing time rather than an x-offset keeps the parameterization
/// stable under shifts of the time origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrowthModel")]
pub struct GrowthModel {
    pub family: GrowthFamily,
    pub g_u: f64,
    pub q_h: f64,
    pub t_h: f64,
}

#[derive(Deserialize)]
struct RawGrowthModel {
    family: GrowthFamily,
    g_u: f64,
    q_h: f64,
    t_h: f64,
}

impl TryFrom<RawGrowthModel> for GrowthModel {
    type Error = FitError;
    fn try_from(raw: RawGrowthModel) -> Result<Self, FitError> {
        GrowthModel::new(raw.family, raw.g_u, raw.q_h, raw.t_h)
    }
}

impl GrowthModel {
    pub fn new(family: GrowthFamily, g_u: f64, q_h: f64, t_h: f64) -> Result<Self, FitError> {
        if !(g_u.is_finite() && g_u > 0.0) {
            return Err(FitError::InvalidModel { what: "g_u must be positive and finite" });
        }
        if !(q_h.is_finite() && q_h > 0.0) {
            return Err(FitError::InvalidModel { what: "Q_h must be positive and finite" });
        }
        if !t_h.is_finite() {
            return Err(FitError::InvalidModel { what: "t_h must be finite" });
        }
        Ok(Self { family, g_u, q_h, t_h })
    }

    /// Dimensionless position of clock time `t`.
    pub fn x_at(&self, t: f64) -> f64 {
        self.g_u * (t - self.t_h)
    }
}

/// One fitted candidate with its quality summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GrowthModel,
    pub rss: f64,
    pub n: usize,
    pub n_params: u32,
    pub fvu: f64,
    pub fvu_log: f64,
    pub converged: bool,
    pub restarts_used: u32,
}

/// Outcome of the two Mann-Kendall preconditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub q_trend: TrendResult,
    pub rate_trend: TrendResult,
    pub q_passed: bool,
    pub rate_passed: bool,
    pub passed: bool,
    pub alpha: f64,
}

/// Result of the minimal-model scan over single-term orders and the
/// logistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalSelection {
    /// All scan fits: single-term orders ascending, then the logistic.
    pub candidates: Vec<FitResult>,
    pub best_sth: FitResult,
    pub logistic: FitResult,
    pub chosen: FitResult,
}

/// Full record of a gated selection run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub gate: GateResult,
    /// Every fit examined, in evaluation order; `chosen` is one of them.
    pub candidates: Vec<FitResult>,
    pub f_chain: Vec<FTestResult>,
    pub chosen: FitResult,
    /// Q_h of the chosen model over the first observed Q.
    pub q_h_ratio: f64,
}

/// Knobs for [`run_ladder`].
#[derive(Debug, Clone)]
pub struct LadderConfig {
    pub alpha: f64,
    /// Largest single-term order scanned and largest order a ladder rung
    /// may add.
    pub k_max: u32,
    /// Cap on the number of hindering terms in the final model.
    pub max_terms: u32,
    pub include_sth: bool,
    pub include_logistic: bool,
    pub include_multi: bool,
    pub settings: SolverSettings,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            k_max: 12,
            max_terms: 3,
            include_sth: true,
            include_logistic: true,
            include_multi: true,
            settings: SolverSettings::default(),
        }
    }
}

/// Model value at one time: Q_h · h(g_u (t - t_h)).
pub fn predict(model: &GrowthModel, t: f64, settings: &SolverSettings) -> Result<f64, FitError> {
    let h = kernel::h_of_x(&model.family, model.x_at(t), settings)?;
    Ok(model.q_h * h)
}

/// Model values along a time grid.
///
/// Grids sorted in time reuse each solution as the warm start for the
/// next point, which makes dense evaluation cheap for the implicit
/// series families.
pub fn predict_series(
    model: &GrowthModel,
    times: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<f64>, FitError> {
    match model.family.series_terms()? {
        Some(terms) if !terms.is_empty() => {
            let mut out = Vec::with_capacity(times.len());
            let mut warm = None;
            for &t in times {
                let u = solve::solve_u(&terms, model.x_at(t), settings, warm)?;
                warm = Some(u);
                out.push(model.q_h * u.exp());
            }
            Ok(out)
        }
        _ => times.iter().map(|&t| predict(model, t, settings)).collect(),
    }
}

/// Equal-relative-weight residual sum Σ(Q̂_i/Q_i - 1)².
pub fn rss(
    model: &GrowthModel,
    series: &TimeSeries,
    settings: &SolverSettings,
) -> Result<f64, FitError> {
    let preds = predict_series(model, series.times(), settings)?;
    Ok(preds
        .iter()
        .zip(series.values())
        .map(|(&p, &q)| {
            let r = p / q - 1.0;
            r * r
        })
        .sum())
}

/// Dimensionless distance from the series start to the hindering
/// crossing, as a function of the ratio q = Q_h/Q_0.
///
/// Equal to -x(1/q) of the family's profile inverse; closed forms:
/// single-term ln q + (1 - q^-k)/k, logistic ln(2q - 1), exponential
/// ln q. A logistic ratio must exceed 1/2: the profile never reaches
/// twice its crossing value, so smaller ratios have no crossing at all.
pub fn xh_shift(family: &GrowthFamily, q_h: f64) -> Result<f64, FitError> {
    if !(q_h.is_finite() && q_h > 0.0) {
        return Err(FitError::InvalidModel { what: "hindering ratio must be positive" });
    }
    match family {
        GrowthFamily::Exponential => Ok(q_h.ln()),
        GrowthFamily::SingleTerm { k } => {
            let kf = *k as f64;
            Ok(q_h.ln() + (1.0 - q_h.powf(-kf)) / kf)
        }
        GrowthFamily::Logistic => {
            if q_h <= 0.5 {
                return Err(FitError::LogisticDomain { q_h });
            }
            Ok((2.0 * q_h - 1.0).ln())
        }
        // general form behind all the closed cases: the series start sits
        // at x_0 = x(h = 1/q), and the crossing is -x_0 away from it
        GrowthFamily::MultiTerm { .. } => Ok(-kernel::x_of_h(family, q_h.recip())?),
        GrowthFamily::GompertzRef { .. } => Err(FitError::Kernel(KernelError::UnsupportedFamily {
            op: "xh_shift",
            family: family.name(),
        })),
    }
}

/// Checks the two preconditions for hindered-growth modeling: Q must
/// show an increasing trend and its finite-difference growth rate a
/// decreasing one, both one-tailed Mann-Kendall at `alpha`.
pub fn check_growth_preconditions(
    series: &TimeSeries,
    alpha: f64,
) -> Result<GateResult, FitError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::Stats(StatsError::Domain { what: "alpha must lie in (0, 1)" }));
    }
    let q_trend = stats::mk_test(series.values(), TrendDirection::Increasing)?;
    let rates: Vec<f64> = stats::growth_rates(series).into_iter().map(|(_, g)| g).collect();
    let rate_trend = stats::mk_test(&rates, TrendDirection::Decreasing)?;
    let q_passed = q_trend.p_one_tailed < alpha;
    let rate_passed = rate_trend.p_one_tailed < alpha;
    Ok(GateResult {
        q_trend,
        rate_trend,
        q_passed,
        rate_passed,
        passed: q_passed && rate_passed,
        alpha,
    })
}

// Continuous-parameter shape of one family during optimization. The
// vector layout is [ln g_u, ln Q_h, (t_h - t0)/span, logits...]; the
// exponential uses only the first two entries with t_h pinned to t0, and
// a softmax with the first weight's logit pinned to zero maps the tail
// onto the weight simplex.
enum Shape {
    Exponential,
    Logistic,
    Series(Vec<u32>),
}

impl Shape {
    fn of(family: &GrowthFamily) -> Result<Self, FitError> {
        match family {
            GrowthFamily::Exponential => Ok(Shape::Exponential),
            GrowthFamily::Logistic => Ok(Shape::Logistic),
            GrowthFamily::SingleTerm { k } => Ok(Shape::Series(vec![*k])),
            GrowthFamily::MultiTerm { weights } => Ok(Shape::Series(weights.orders().collect())),
            GrowthFamily::GompertzRef { .. } => {
                Err(FitError::Kernel(KernelError::UnsupportedFamily {
                    op: "fit_family",
                    family: family.name(),
                }))
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Shape::Exponential => 2,
            Shape::Logistic => 3,
            Shape::Series(ks) => 3 + ks.len().saturating_sub(1),
        }
    }

    fn n_params(&self) -> u32 {
        self.dim() as u32
    }

    // raw softmax weights with the first logit pinned at zero
    fn raw_weights(logits: &[f64]) -> Vec<f64> {
        let mut raw = Vec::with_capacity(logits.len() + 1);
        raw.push(1.0);
        for &l in logits {
            raw.push(l.clamp(-40.0, 40.0).exp());
        }
        raw
    }

    fn terms(&self, theta: &[f64]) -> Option<Vec<(f64, f64)>> {
        let Shape::Series(ks) = self else { return None };
        let raw = Self::raw_weights(&theta[3..]);
        let sum: f64 = raw.iter().sum();
        Some(
            ks.iter()
                .zip(&raw)
                .map(|(&k, &w)| (k as f64, w / sum))
                .collect(),
        )
    }

    fn decode(&self, theta: &[f64], t0: f64, span: f64) -> Result<GrowthModel, FitError> {
        let g_u = theta[0].exp();
        match self {
            Shape::Exponential => {
                GrowthModel::new(GrowthFamily::Exponential, g_u, theta[1].exp(), t0)
            }
            Shape::Logistic => GrowthModel::new(
                GrowthFamily::Logistic,
                g_u,
                theta[1].exp(),
                t0 + theta[2] * span,
            ),
            Shape::Series(ks) => {
                let family = if ks.len() == 1 {
                    GrowthFamily::single_term(ks[0])?
                } else {
                    let raw = Self::raw_weights(&theta[3..]);
                    let sum: f64 = raw.iter().sum();
                    let weights = HinderingWeights::new(
                        ks.iter().zip(&raw).map(|(&k, &w)| (k, w / sum)).collect::<Vec<_>>(),
                    )?;
                    GrowthFamily::MultiTerm { weights }
                };
                GrowthModel::new(family, g_u, theta[1].exp(), t0 + theta[2] * span)
            }
        }
    }

    // inverse of decode, for warm-starting from a known model
    fn encode(&self, model: &GrowthModel, t0: f64, span: f64) -> Vec<f64> {
        let mut theta = vec![model.g_u.ln(), model.q_h.ln()];
        if !matches!(self, Shape::Exponential) {
            theta.push((model.t_h - t0) / span);
        }
        if let (Shape::Series(ks), GrowthFamily::MultiTerm { weights }) = (self, &model.family) {
            if ks.len() > 1 {
                let w = weights.terms();
                let w1 = w[0].1;
                for &(_, wi) in &w[1..] {
                    theta.push((wi / w1).ln());
                }
            }
        } else if let Shape::Series(ks) = self {
            // model family carries no weights for these orders; equal split
            theta.extend(std::iter::repeat(0.0).take(ks.len().saturating_sub(1)));
        }
        theta
    }
}

// Objective evaluation: decode theta, predict every data point with
// warm-started solves, accumulate the relative residual. Any numerical
// failure (overflow, non-convergence, non-positive parameters) maps to
// +inf so the simplex retreats.
fn objective(
    shape: &Shape,
    theta: &[f64],
    t: &[f64],
    q: &[f64],
    t0: f64,
    span: f64,
    settings: &SolverSettings,
) -> f64 {
    let g_u = theta[0].exp();
    let q_scale = theta[1].exp();
    if !(g_u.is_finite() && g_u > 0.0 && q_scale.is_finite() && q_scale > 0.0) {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    match shape {
        Shape::Exponential => {
            for (&ti, &qi) in t.iter().zip(q) {
                let pred = q_scale * (g_u * (ti - t0)).exp();
                let r = pred / qi - 1.0;
                acc += r * r;
            }
        }
        Shape::Logistic => {
            let t_h = t0 + theta[2] * span;
            for (&ti, &qi) in t.iter().zip(q) {
                let x = g_u * (ti - t_h);
                let h = 2.0 / (1.0 + (-x).exp());
                let r = q_scale * h / qi - 1.0;
                acc += r * r;
            }
        }
        Shape::Series(_) => {
            let Some(terms) = shape.terms(theta) else { return f64::INFINITY };
            let t_h = t0 + theta[2] * span;
            let mut warm = None;
            for (&ti, &qi) in t.iter().zip(q) {
                let x = g_u * (ti - t_h);
                let Ok(u) = solve::solve_u(&terms, x, settings, warm) else {
                    return f64::INFINITY;
                };
                warm = Some(u);
                let r = q_scale * u.exp() / qi - 1.0;
                acc += r * r;
            }
        }
    }
    acc
}

// Data-driven initial guesses shared by all profile families: the
// unhindered rate from the early growth-rate maximum, and the hindering
// crossing from where the smoothed rate first halves.
fn profile_heuristics(series: &TimeSeries) -> (f64, f64, f64) {
    let rates = stats::growth_rates(series);
    let m = rates.len();
    let smoothed: Vec<f64> = (0..m)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(m - 1);
            rates[lo..=hi].iter().map(|&(_, g)| g).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let early = (m / 3).max(1);
    let g0 = smoothed[..early]
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        .max(1e-8);

    let q = series.values();
    let half = smoothed.iter().position(|&g| g <= 0.5 * g0);
    let (t_h0, q_h0) = match half {
        Some(i) => (rates[i].0, (q[i] * q[i + 1]).sqrt()),
        None => {
            let (_, t_last) = series.span();
            (t_last, *q.last().unwrap())
        }
    };
    (g0, q_h0, t_h0)
}

// Deterministic perturbation table applied to the heuristic start:
// multiplies g_u and Q_h, shifts the normalized crossing time.
const START_TABLE: [(f64, f64, f64); 8] = [
    (1.0, 1.0, 0.0),
    (0.5, 1.0, 0.1),
    (2.0, 1.0, -0.1),
    (1.0, 4.0, 0.2),
    (1.0, 0.25, -0.2),
    (0.5, 4.0, 0.3),
    (2.0, 0.25, -0.3),
    (4.0, 1.0, 0.05),
];

/// Fits one family to the series by multi-start Nelder-Mead.
///
/// Starts are deterministic: an optional caller-provided model first,
/// then eight perturbations of data-driven heuristics. The search stops
/// early once two converged starts agree to 1e-9 relative residual or
/// the residual is exhausted at floating-point level; `restarts_used`
/// records how many starts actually ran. Fails only if no start's
/// simplex converged.
pub fn fit_family(
    series: &TimeSeries,
    family: &GrowthFamily,
    init: Option<&GrowthModel>,
    settings: &SolverSettings,
) -> Result<FitResult, FitError> {
    let shape = Shape::of(family)?;
    let (t0, t_last) = series.span();
    let span = t_last - t0;
    let t = series.times();
    let q = series.values();
    let n = series.len();

    let (g0, q_h0, t_h0) = match shape {
        Shape::Exponential => {
            let g = ((q[n - 1] / q[0]).ln() / span).max(1e-8);
            (g, q[0], t0)
        }
        _ => profile_heuristics(series),
    };
    let u0 = (t_h0 - t0) / span;

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(9);
    if let Some(model) = init {
        starts.push(shape.encode(model, t0, span));
    }
    for &(mg, mq, du) in &START_TABLE {
        let mut theta = vec![(g0 * mg).ln(), (q_h0 * mq).ln()];
        if !matches!(shape, Shape::Exponential) {
            theta.push(u0 + du);
        }
        if let Shape::Series(ref ks) = shape {
            theta.extend(std::iter::repeat(0.0).take(ks.len().saturating_sub(1)));
        }
        starts.push(theta);
    }

    let dim = shape.dim();
    let mut step = vec![0.4, 0.6];
    if dim >= 3 {
        step.push(0.12);
    }
    step.resize(dim, 0.7);

    let max_iter = 1200 + 300 * dim as u32;
    let mut best: Option<(optimizer::NmResult, u32)> = None;
    let mut launched = 0u32;
    for start in &starts {
        let r = nelder_mead(
            |theta| objective(&shape, theta, t, q, t0, span, settings),
            start,
            &step,
            1e-9,
            max_iter,
        );
        launched += 1;
        let stop = match &best {
            Some((b, _)) => {
                r.converged
                    && b.converged
                    && (r.fx - b.fx).abs() <= 1e-9 * b.fx.max(r.fx).max(1e-30)
            }
            None => false,
        };
        let better = best.as_ref().map_or(true, |(b, _)| {
            r.fx < b.fx || (r.fx == b.fx && r.converged && !b.converged)
        });
        if better {
            best = Some((r, launched));
        }
        let (b, _) = best.as_ref().unwrap();
        if stop || (b.converged && b.fx <= 1e-18 * n as f64) {
            break;
        }
    }

    let (mut winner, _) = best.unwrap();
    if !winner.converged || !winner.fx.is_finite() {
        return Err(FitError::OptimizerFailure);
    }
    // a collapsed simplex can stagnate short of the optimum; restarting
    // from the incumbent with a smaller fresh simplex recovers the rest
    let polish_step: Vec<f64> = step.iter().map(|s| s * 0.05).collect();
    for _ in 0..3 {
        let r = nelder_mead(
            |theta| objective(&shape, theta, t, q, t0, span, settings),
            &winner.x,
            &polish_step,
            1e-9,
            max_iter,
        );
        let gained = winner.fx - r.fx > 1e-10 * winner.fx.max(1e-30);
        if r.converged && r.fx <= winner.fx {
            winner = r;
        }
        if !gained {
            break;
        }
    }
    let model = shape.decode(&winner.x, t0, span)?;
    let preds = predict_series(&model, t, settings)?;
    let gof = stats::r2_fvu(q, &preds)?;
    Ok(FitResult {
        model,
        rss: winner.fx,
        n,
        n_params: shape.n_params(),
        fvu: gof.fvu,
        fvu_log: gof.fvu_log.unwrap_or(f64::NAN),
        converged: true,
        restarts_used: launched,
    })
}

// Scan fits in a fixed order, choosing the strict minimum so earlier
// entries win ties: single-term orders ascending, then the logistic.
fn scan_minimal(
    series: &TimeSeries,
    ks: &[u32],
    include_logistic: bool,
    settings: &SolverSettings,
) -> Result<(Vec<FitResult>, Option<usize>, Option<usize>), FitError> {
    use rayon::prelude::*;

    let fams: Vec<GrowthFamily> = ks
        .iter()
        .map(|&k| GrowthFamily::single_term(k))
        .collect::<Result<_, _>>()?;
    let mut raw: Vec<Result<FitResult, FitError>> = fams
        .par_iter()
        .map(|fam| fit_family(series, fam, None, settings))
        .collect();
    if include_logistic {
        raw.push(fit_family(series, &GrowthFamily::Logistic, None, settings));
    }
    let fits: Vec<FitResult> = raw.into_iter().collect::<Result<_, _>>()?;

    let best_sth = (!ks.is_empty()).then(|| {
        let mut best = 0;
        for i in 1..ks.len() {
            if fits[i].rss < fits[best].rss {
                best = i;
            }
        }
        best
    });
    let logistic = include_logistic.then(|| fits.len() - 1);
    Ok((fits, best_sth, logistic))
}

/// Fits every single-term order in `k_range` plus the logistic and picks
/// the minimal model by residual, ties broken toward smaller order and
/// toward single-term over logistic.
pub fn select_minimal(
    series: &TimeSeries,
    k_range: std::ops::RangeInclusive<u32>,
    settings: &SolverSettings,
) -> Result<MinimalSelection, FitError> {
    let ks: Vec<u32> = k_range.collect();
    if ks.is_empty() {
        return Err(FitError::NoCandidates);
    }
    let (fits, best_sth, logistic) = scan_minimal(series, &ks, true, settings)?;
    let best_sth = best_sth.unwrap();
    let logistic = logistic.unwrap();
    let chosen = if fits[logistic].rss < fits[best_sth].rss { logistic } else { best_sth };
    Ok(MinimalSelection {
        best_sth: fits[best_sth].clone(),
        logistic: fits[logistic].clone(),
        chosen: fits[chosen].clone(),
        candidates: fits,
    })
}

fn family_orders(family: &GrowthFamily) -> Option<Vec<u32>> {
    match family {
        GrowthFamily::SingleTerm { k } => Some(vec![*k]),
        GrowthFamily::MultiTerm { weights } => Some(weights.orders().collect()),
        _ => None,
    }
}

// One-at-a-time term additions gated by the F-test. Returns the fits
// attempted per rung (best extension each time, whether accepted or
// not), the F-test chain, and the final accepted model.
fn climb(
    series: &TimeSeries,
    base: &FitResult,
    alpha: f64,
    k_cap: u32,
    max_terms: u32,
    settings: &SolverSettings,
) -> Result<(Vec<FitResult>, Vec<FTestResult>, FitResult), FitError> {
    use rayon::prelude::*;

    let mut orders = family_orders(&base.model.family)
        .ok_or(FitError::InvalidModel { what: "ladder base must be a hindering-series fit" })?;
    let mut current = base.clone();
    let mut rungs = Vec::new();
    let mut chain = Vec::new();

    while (orders.len() as u32) < max_terms {
        let additions: Vec<u32> = (1..=k_cap).filter(|k| !orders.contains(k)).collect();
        if additions.is_empty() {
            break;
        }
        // each candidate extension keeps the fitted weights, giving the
        // new order a small share, and refits everything jointly
        let inits: Vec<(GrowthFamily, GrowthModel)> = additions
            .iter()
            .map(|&k| extension_seed(&current.model, &orders, k))
            .collect::<Result<_, _>>()?;
        let fits: Vec<Result<FitResult, FitError>> = inits
            .par_iter()
            .map(|(fam, init)| fit_family(series, fam, Some(init), settings))
            .collect();
        let mut best: Option<FitResult> = None;
        for fit in fits {
            let fit = fit?;
            if best.as_ref().map_or(true, |b| fit.rss < b.rss) {
                best = Some(fit);
            }
        }
        let best = best.unwrap();
        let test = stats::f_test(
            current.rss,
            best.rss,
            current.n_params,
            current.n_params + 1,
            series.len(),
            alpha,
        )?;
        let accepted = test.reject_null;
        rungs.push(best.clone());
        chain.push(test);
        if !accepted {
            break;
        }
        orders = family_orders(&best.model.family).unwrap();
        current = best;
    }
    Ok((rungs, chain, current))
}

// Initial model for an extension rung: existing weights scaled to make
// room for a 5% share on the added order.
fn extension_seed(
    model: &GrowthModel,
    orders: &[u32],
    added: u32,
) -> Result<(GrowthFamily, GrowthModel), FitError> {
    const SEED_SHARE: f64 = 0.05;
    let old: Vec<(u32, f64)> = match &model.family {
        GrowthFamily::SingleTerm { k } => vec![(*k, 1.0)],
        GrowthFamily::MultiTerm { weights } => weights.terms().to_vec(),
        _ => return Err(FitError::InvalidModel { what: "extension base must be a series family" }),
    };
    debug_assert_eq!(old.len(), orders.len());
    let mut pairs: Vec<(u32, f64)> = old
        .into_iter()
        .map(|(k, a)| (k, a * (1.0 - SEED_SHARE)))
        .collect();
    pairs.push((added, SEED_SHARE));
    pairs.sort_by_key(|&(k, _)| k);
    let family = GrowthFamily::MultiTerm { weights: HinderingWeights::new(pairs)? };
    let init = GrowthModel::new(family.clone(), model.g_u, model.q_h, model.t_h)?;
    Ok((family, init))
}

/// Extends an accepted single-term base with further hindering terms,
/// each addition gated by the F-test at `alpha`. A logistic base is
/// already saturated in this sense and passes through unchanged.
pub fn extend_ladder(
    series: &TimeSeries,
    base: &FitResult,
    alpha: f64,
    max_terms: u32,
) -> Result<LadderReport, FitError> {
    let settings = SolverSettings::default();
    let gate = check_growth_preconditions(series, alpha)?;
    if !gate.passed {
        return Err(FitError::GateFailed(Box::new(gate)));
    }
    let q0 = series.values()[0];
    if matches!(base.model.family, GrowthFamily::Logistic) {
        return Ok(LadderReport {
            gate,
            candidates: vec![base.clone()],
            f_chain: Vec::new(),
            q_h_ratio: base.model.q_h / q0,
            chosen: base.clone(),
        });
    }
    let (rungs, chain, chosen) = climb(series, base, alpha, 12, max_terms, &settings)?;
    let mut candidates = vec![base.clone()];
    candidates.extend(rungs);
    Ok(LadderReport {
        gate,
        candidates,
        f_chain: chain,
        q_h_ratio: chosen.model.q_h / q0,
        chosen,
    })
}

/// The full selection pipeline: trend gates, exponential baseline,
/// minimal-model scan, the F-gate that justifies hindering at all, and
/// the term ladder.
pub fn run_ladder(series: &TimeSeries, config: &LadderConfig) -> Result<LadderReport, FitError> {
    if !config.include_sth && !config.include_logistic {
        return Err(FitError::NoCandidates);
    }
    let gate = check_growth_preconditions(series, config.alpha)?;
    if !gate.passed {
        return Err(FitError::GateFailed(Box::new(gate)));
    }
    let q0 = series.values()[0];
    let settings = &config.settings;

    let exp_fit = fit_family(series, &GrowthFamily::Exponential, None, settings)?;
    let ks: Vec<u32> = if config.include_sth { (1..=config.k_max).collect() } else { Vec::new() };
    let (scan, best_sth, logistic) =
        scan_minimal(series, &ks, config.include_logistic, settings)?;
    let minimal_idx = match (best_sth, logistic) {
        (Some(s), Some(l)) => {
            if scan[l].rss < scan[s].rss {
                l
            } else {
                s
            }
        }
        (Some(s), None) => s,
        (None, Some(l)) => l,
        (None, None) => return Err(FitError::NoCandidates),
    };
    let minimal = scan[minimal_idx].clone();

    let mut candidates = vec![exp_fit.clone()];
    candidates.extend(scan);
    let mut f_chain = Vec::new();

    // does any hindering term beat the exponential baseline?
    let against_exp = stats::f_test(
        exp_fit.rss,
        minimal.rss,
        exp_fit.n_params,
        minimal.n_params,
        series.len(),
        config.alpha,
    )?;
    let hindering_justified = against_exp.reject_null;
    f_chain.push(against_exp);
    if !hindering_justified {
        return Ok(LadderReport {
            gate,
            candidates,
            f_chain,
            q_h_ratio: exp_fit.model.q_h / q0,
            chosen: exp_fit,
        });
    }

    let chosen = if config.include_multi
        && !matches!(minimal.model.family, GrowthFamily::Logistic)
    {
        let (rungs, chain, final_fit) = climb(
            series,
            &minimal,
            config.alpha,
            config.k_max,
            config.max_terms,
            settings,
        )?;
        candidates.extend(rungs);
        f_chain.extend(chain);
        final_fit
    } else {
        minimal
    };

    Ok(LadderReport {
        gate,
        candidates,
        f_chain,
        q_h_ratio: chosen.model.q_h / q0,
        chosen,
    })
}
