//! Forward application of fitted models and accelerated-growth references.
//!
//! A forecast places a fitted profile at a chosen time and reports size,
//! magnitude-dependent rate and dimensionless position together. The
//! stability exponent g + Q dg/dQ classifies any point of a rate curve:
//! negative means a displacement from the trend decays, positive means it
//! compounds, so every rate that rises with Q is unstable. Two
//! accelerated references bound what rising rates can do before physics
//! intervenes: the mirrored logistic runs into a finite-time singularity
//! at x = ln 2, and the quadratic-denominator rate peaks and then hands
//! over to ordinary hindering. A fixed-step integrator for dQ/dt = g(Q) Q
//! cross-validates all the closed forms from the defining equation alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitError, GrowthModel};
use crate::kernel::{self, GrowthFamily, KernelError, SolverSettings};

/// Errors from forecasting and the accelerated-growth diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("doubling time needs a positive rate, got {g_u}")]
    NonPositiveRate { g_u: f64 },
    #[error("accelerated logistic diverges at x = ln 2; got x = {x}")]
    SingularityReached { x: f64 },
    #[error("quadratic rate stays positive only for alpha > 1/4, got {alpha}")]
    AlphaTooSmall { alpha: f64 },
    #[error("integration step at t = {t} grew Q more than tenfold; singularity or step too large")]
    StepOverflow { t: f64 },
    #[error("invalid input: {what}")]
    InvalidInput { what: &'static str },
}

/// Model state at one forecast time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub t: f64,
    /// Size Q(t).
    pub q: f64,
    /// Rate g(Q(t)) = g_u / (1 + f); equals g_u/2 at the crossing and
    /// stays within (0, g_u] for every decelerated family.
    pub g: f64,
    /// Dimensionless position g_u (t - t_h) relative to the crossing.
    pub x_minus_xh: f64,
}

/// Rate curve g(Q) = g_u / (1 - Q/K + alpha_q (Q/K)^2).
///
/// The lowest-order polynomial denominator that accelerates growth without
/// ever allowing contraction: alpha_q > 1/4 keeps it positive for all Q.
/// The rate rises while Q < K/(2 alpha_q), peaks at alpha_q g_u /
/// (alpha_q - 1/4), then falls below g_u once Q > K/alpha_q, where the
/// curve becomes ordinary second-order hindering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccelQuadratic {
    pub g_u: f64,
    /// Size scale K: the denominator terms are powers of Q/K.
    pub k: f64,
    pub alpha_q: f64,
}

impl AccelQuadratic {
    pub fn new(g_u: f64, k: f64, alpha_q: f64) -> Result<Self, ForecastError> {
        if !(g_u.is_finite() && g_u > 0.0) {
            return Err(ForecastError::NonPositiveRate { g_u });
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(ForecastError::InvalidInput { what: "scale K must be positive and finite" });
        }
        if !(alpha_q.is_finite() && alpha_q > 0.25) {
            return Err(ForecastError::AlphaTooSmall { alpha: alpha_q });
        }
        Ok(Self { g_u, k, alpha_q })
    }

    /// Rate at size q; saturates to 0 when (q/K)^2 overflows.
    pub fn rate(&self, q: f64) -> Result<f64, ForecastError> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(ForecastError::InvalidInput { what: "rate needs Q >= 0" });
        }
        let u = q / self.k;
        Ok(self.g_u / (1.0 - u + self.alpha_q * u * u))
    }

    /// Top of the rate curve, (K / (2 alpha_q), alpha_q g_u / (alpha_q - 1/4)).
    pub fn peak(&self) -> (f64, f64) {
        let q_peak = self.k / (2.0 * self.alpha_q);
        let g_peak = self.alpha_q * self.g_u / (self.alpha_q - 0.25);
        (q_peak, g_peak)
    }
}

/// Model state at time `t`: size via the profile, rate via g_u / (1 + f).
pub fn forecast(
    model: &GrowthModel,
    t: f64,
    settings: &SolverSettings,
) -> Result<Forecast, ForecastError> {
    let x = model.x_at(t);
    let h = kernel::h_of_x(&model.family, x, settings)?;
    let g = model.g_u * kernel::growth_rate_factor(&model.family, h)?;
    Ok(Forecast { t, q: model.q_h * h, g, x_minus_xh: x })
}

/// Forecasts along a time grid; sorted grids solve the profile warm.
pub fn forecast_series(
    model: &GrowthModel,
    times: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<Forecast>, ForecastError> {
    let values = fit::predict_series(model, times, settings)?;
    times
        .iter()
        .zip(values)
        .map(|(&t, q)| {
            let mut h = q / model.q_h;
            // the division can carry Q = Q_h h a rounding past the logistic
            // bound h = 2 at saturation
            if matches!(model.family, GrowthFamily::Logistic) {
                h = h.min(2.0);
            }
            let g = model.g_u * kernel::growth_rate_factor(&model.family, h)?;
            Ok(Forecast { t, q, g, x_minus_xh: model.x_at(t) })
        })
        .collect()
}

/// Time for unhindered growth at rate `g_u` to double: ln 2 / g_u.
pub fn doubling_time(g_u: f64) -> Result<f64, ForecastError> {
    if !(g_u.is_finite() && g_u > 0.0) {
        return Err(ForecastError::NonPositiveRate { g_u });
    }
    Ok(std::f64::consts::LN_2 / g_u)
}

/// Finite ceiling of the trajectory, when one exists.
///
/// The logistic saturates at 2 Q_h and the Gompertz reference at its
/// capacity. Every finite hindering series describes unbounded growth, so
/// those families have none.
pub fn carrying_capacity(model: &GrowthModel) -> Option<f64> {
    match &model.family {
        GrowthFamily::Logistic => Some(2.0 * model.q_h),
        GrowthFamily::GompertzRef { capacity, .. } => Some(*capacity),
        _ => None,
    }
}

/// Growth exponent of a small size perturbation, g + Q dg/dQ at Q > 0.
///
/// Displacing a trajectory by dQ changes the flow dQ/dt by this factor
/// times dQ: a negative value (dg/dQ < -g/Q) pulls the displacement back
/// to the trend, a positive one compounds it. Any rate that rises with Q
/// is therefore unstable.
pub fn stability_exponent(g: f64, dg_dq: f64, q: f64) -> f64 {
    g + q * dg_dq
}

/// Analytic slope dg/dQ of a fitted rate curve at size `q`.
///
/// Chain rule through h = q / Q_h. Series families give
/// dg/dQ = -g_u f'(h) / (1 + f(h))^2 / Q_h with f'(h) = sum a_k k h^(k-1);
/// the logistic rate falls linearly, dg/dQ = -g_u / (2 Q_h). Exact
/// derivatives keep the stability diagnostics free of differencing noise.
pub fn rate_slope(model: &GrowthModel, q: f64) -> Result<f64, ForecastError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(ForecastError::InvalidInput { what: "rate slope needs Q > 0" });
    }
    match &model.family {
        GrowthFamily::Logistic => Ok(-model.g_u / (2.0 * model.q_h)),
        family => match family.series_terms()? {
            Some(terms) => {
                let h = q / model.q_h;
                let mut f = 0.0;
                let mut df = 0.0;
                for &(k, a) in &terms {
                    let hk1 = h.powf(k - 1.0);
                    f += a * hk1 * h;
                    df += a * k * hk1;
                }
                let denom = 1.0 + f;
                let slope = -model.g_u * df / (denom * denom) / model.q_h;
                // past series overflow the true slope underflows f64
                Ok(if slope.is_finite() { slope } else { 0.0 })
            }
            None => Err(KernelError::UnsupportedFamily {
                op: "rate_slope",
                family: family.name(),
            }
            .into()),
        },
    }
}

/// Runaway mirror of the logistic: Q(x) = K e^x / (2 - e^x).
///
/// Solves dQ/dt = g_u (1 + Q/K) Q, the logistic rate with the interaction
/// sign flipped, with x = g_u t counted from the point where Q = K. The
/// denominator vanishes at x = ln 2: this kind of acceleration exhausts
/// itself within a fixed fraction of a doubling time.
pub fn accel_logistic(k: f64, x: f64) -> Result<f64, ForecastError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(ForecastError::InvalidInput { what: "scale K must be positive and finite" });
    }
    if !x.is_finite() {
        return Err(ForecastError::InvalidInput { what: "x must be finite" });
    }
    if x >= std::f64::consts::LN_2 {
        return Err(ForecastError::SingularityReached { x });
    }
    let ex = x.exp();
    Ok(k * ex / (2.0 - ex))
}

/// Fixed-step classical Runge-Kutta trajectory of dQ/dt = g(Q) Q.
///
/// An independent check on the closed forms: any magnitude-dependent rate
/// integrates from the defining equation alone, and the result can be held
/// against an analytic trajectory. The step is constant apart from a final
/// shortened one that lands exactly on the end time. No adaptive control:
/// decelerated trajectories are smooth, and near a singularity the run
/// stops with an error as soon as one step multiplies Q more than tenfold.
pub fn integrate_growth(
    rate_of_q: impl Fn(f64) -> f64,
    q0: f64,
    t_span: (f64, f64),
    step: f64,
) -> Result<Vec<(f64, f64)>, ForecastError> {
    let (t0, t1) = t_span;
    if !(q0.is_finite() && q0 > 0.0) {
        return Err(ForecastError::InvalidInput { what: "Q0 must be positive and finite" });
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(ForecastError::InvalidInput { what: "need finite t_span with t1 > t0" });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(ForecastError::InvalidInput { what: "step must be positive and finite" });
    }

    // the grid is built by multiplication, not accumulation, so rounding
    // cannot smuggle in an extra step at the far end
    let span = t1 - t0;
    let n_full = (span / step).floor() as usize;
    let mut grid: Vec<f64> = (0..=n_full).map(|i| t0 + i as f64 * step).collect();
    let last = *grid.last().expect("grid holds at least t0");
    if t1 - last > 1e-9 * step {
        grid.push(t1);
    } else {
        *grid.last_mut().expect("grid holds at least t0") = t1;
    }

    let rhs = |q: f64| rate_of_q(q) * q;
    let mut out = Vec::with_capacity(grid.len());
    let mut q = q0;
    out.push((t0, q));
    for pair in grid.windows(2) {
        let h = pair[1] - pair[0];
        let k1 = rhs(q);
        let k2 = rhs(q + 0.5 * h * k1);
        let k3 = rhs(q + 0.5 * h * k2);
        let k4 = rhs(q + h * k3);
        let next = q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() || next > 10.0 * q {
            return Err(ForecastError::StepOverflow { t: pair[1] });
        }
        q = next;
        out.push((pair[1], q));
    }
    Ok(out)
}
