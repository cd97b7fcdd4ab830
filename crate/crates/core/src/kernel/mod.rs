//! Dimensionless growth kernel.
//!
//! A decelerated growth trajectory Q(t) is written Q = Q_h * h(x) with
//! x = g_u * (t - t_h), where g_u is the unhindered (early) rate and Q_h the
//! magnitude at which hindering has grown to match the unhindered drive.
//! The profile h is fixed by the hindering series f(h) = sum_k a_k h^k through
//!
//! ```text
//! ln h + sum_k (a_k / k) (h^k - 1) = x,      sum_k a_k = 1,
//! ```
//!
//! so every family obeys h(0) = 1 and h'(0) = 1/2. The logistic profile
//! l(x) = 2 / (1 + e^-x) is the closed-form member whose weights are the
//! geometric tail a_k = 2^-k; a pure exponential is the no-hindering baseline
//! (f = 0, g = g_u). The Gompertz curve is kept only as a reference model: its
//! rate diverges as Q -> 0, so it has no finite unhindered rate and never
//! belongs to the hindering class.

mod gompertz;
pub(crate) mod solve;

pub use gompertz::{gompertz_eval, gompertz_rate_of_q, gompertz_rate_of_t};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest admissible hindering order.
///
/// High orders are numerically safe (everything runs in log space) but carry
/// no statistical power at realistic sample sizes; fitting grids cap lower.
pub const MAX_ORDER: u32 = 20;

/// Errors from kernel evaluations and the profile solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("h must be positive, got {h}")]
    NonPositiveH { h: f64 },
    #[error("logistic profile requires h < 2, got {h}")]
    LogisticOutOfRange { h: f64 },
    #[error("series term h^k leaves the representable range")]
    Overflow,
    #[error("profile solver did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: u32 },
    #[error("Q_h must be positive")]
    NonPositiveQh,
    #[error("{op} is not defined for the {family} family")]
    UnsupportedFamily {
        op: &'static str,
        family: &'static str,
    },
    #[error("k = 1 has no interior derivative peak (h' rises monotonically to 1)")]
    NoPeak,
    #[error("hindering order must lie in 1..={max}, got {k}", max = MAX_ORDER)]
    InvalidOrder { k: u32 },
    #[error("invalid hindering weights: {reason}")]
    InvalidWeights { reason: String },
    #[error("solver settings require rel_tol > 0 and max_iter >= 1")]
    InvalidSettings,
    #[error("{what} must be finite")]
    NonFinite { what: &'static str },
    #[error("{what}")]
    OutOfDomain { what: &'static str },
    #[error("Gompertz parameter {name} must be positive and finite")]
    GompertzParameter { name: &'static str },
}

/// Positive hindering weights a_k on distinct integer orders, summing to 1.
///
/// The normalization pins the meaning of Q_h: f(Q_h) = sum a_k = 1, the point
/// where hindering equals the unhindered drive and the local rate is g_u / 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<WeightEntry>", into = "Vec<WeightEntry>")]
pub struct HinderingWeights {
    // sorted by order; invariants enforced by the constructor
    terms: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightEntry {
    k: u32,
    a: f64,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl HinderingWeights {
    /// Builds a weight set, validating order range, distinctness, positivity
    /// and the sum-to-one normalization (tolerance 1e-12).
    pub fn new(entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, KernelError> {
        let mut terms: Vec<(u32, f64)> = entries.into_iter().collect();
        if terms.is_empty() {
            return Err(KernelError::InvalidWeights {
                reason: "at least one term is required".into(),
            });
        }
        terms.sort_by_key(|&(k, _)| k);
        let mut sum = 0.0;
        for pair in terms.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(KernelError::InvalidWeights {
                    reason: format!("duplicate order k = {}", pair[0].0),
                });
            }
        }
        for &(k, a) in &terms {
            if k == 0 || k > MAX_ORDER {
                return Err(KernelError::InvalidOrder { k });
            }
            if !a.is_finite() || a <= 0.0 {
                return Err(KernelError::InvalidWeights {
                    reason: format!("weight for k = {k} must be positive and finite, got {a}"),
                });
            }
            sum += a;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(KernelError::InvalidWeights {
                reason: format!("weights must sum to 1 (got {sum})"),
            });
        }
        Ok(Self { terms })
    }

    /// Single-order weight set {k: 1}.
    pub fn single(k: u32) -> Result<Self, KernelError> {
        Self::new([(k, 1.0)])
    }

    /// Bypasses the sum-to-one check; for internal limits such as the
    /// vanishing-hindering test. Orders must still be valid.
    #[cfg(test)]
    pub(crate) fn unnormalized(
        entries: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self, KernelError> {
        let mut terms: Vec<(u32, f64)> = entries.into_iter().collect();
        terms.sort_by_key(|&(k, _)| k);
        for &(k, a) in &terms {
            if k == 0 || k > MAX_ORDER {
                return Err(KernelError::InvalidOrder { k });
            }
            if !a.is_finite() || a <= 0.0 {
                return Err(KernelError::InvalidWeights {
                    reason: format!("weight for k = {k} must be positive, got {a}"),
                });
            }
        }
        Ok(Self { terms })
    }

    /// Terms as (order, weight) pairs, ascending in order.
    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Orders present, ascending.
    pub fn orders(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.iter().map(|&(k, _)| k)
    }
}

impl TryFrom<Vec<WeightEntry>> for HinderingWeights {
    type Error = KernelError;
    fn try_from(v: Vec<WeightEntry>) -> Result<Self, KernelError> {
        HinderingWeights::new(v.into_iter().map(|e| (e.k, e.a)))
    }
}

impl From<HinderingWeights> for Vec<WeightEntry> {
    fn from(w: HinderingWeights) -> Self {
        w.terms.into_iter().map(|(k, a)| WeightEntry { k, a }).collect()
    }
}

/// Growth families the toolkit understands.
///
/// `Exponential` is the hindering-free baseline. `SingleTerm` and `MultiTerm`
/// are finite hindering series; `Logistic` is the closed-form limit of the
/// geometric series a_k = 2^-k. `GompertzRef` is a reference curve only and is
/// rejected by the profile operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GrowthFamily {
    Exponential,
    SingleTerm { k: u32 },
    MultiTerm { weights: HinderingWeights },
    Logistic,
    GompertzRef { b: f64, tau: f64, capacity: f64 },
}

impl GrowthFamily {
    pub fn single_term(k: u32) -> Result<Self, KernelError> {
        if k == 0 || k > MAX_ORDER {
            return Err(KernelError::InvalidOrder { k });
        }
        Ok(GrowthFamily::SingleTerm { k })
    }

    /// Stable short label used in reports and candidate tables.
    pub fn label(&self) -> String {
        match self {
            GrowthFamily::Exponential => "exponential".into(),
            GrowthFamily::SingleTerm { k } => format!("sth_k{k}"),
            GrowthFamily::MultiTerm { weights } => {
                let orders: Vec<String> =
                    weights.orders().map(|k| k.to_string()).collect();
                format!("multi_k{}", orders.join("_"))
            }
            GrowthFamily::Logistic => "logistic".into(),
            GrowthFamily::GompertzRef { .. } => "gompertz_ref".into(),
        }
    }

    /// Number of hindering terms (0 for exponential, none for Gompertz).
    pub fn term_count(&self) -> usize {
        match self {
            GrowthFamily::Exponential | GrowthFamily::GompertzRef { .. } => 0,
            GrowthFamily::SingleTerm { .. } => 1,
            GrowthFamily::MultiTerm { weights } => weights.len(),
            // infinite series, but a single closed-form profile
            GrowthFamily::Logistic => 1,
        }
    }

    pub(crate) fn name(&self) -> &'static str {
        match self {
            GrowthFamily::Exponential => "exponential",
            GrowthFamily::SingleTerm { .. } => "single-term",
            GrowthFamily::MultiTerm { .. } => "multi-term",
            GrowthFamily::Logistic => "logistic",
            GrowthFamily::GompertzRef { .. } => "gompertz-ref",
        }
    }

    /// Series terms as (k, a_k) with k cast to f64, for the solver.
    /// Empty for the exponential; None for Logistic / GompertzRef.
    pub(crate) fn series_terms(&self) -> Result<Option<Vec<(f64, f64)>>, KernelError> {
        match self {
            GrowthFamily::Exponential => Ok(Some(Vec::new())),
            GrowthFamily::SingleTerm { k } => {
                if *k == 0 || *k > MAX_ORDER {
                    return Err(KernelError::InvalidOrder { k: *k });
                }
                Ok(Some(vec![(*k as f64, 1.0)]))
            }
            GrowthFamily::MultiTerm { weights } => Ok(Some(
                weights.terms().iter().map(|&(k, a)| (k as f64, a)).collect(),
            )),
            GrowthFamily::Logistic | GrowthFamily::GompertzRef { .. } => Ok(None),
        }
    }
}

/// Tolerances for the profile solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Convergence threshold on the Newton step in u = ln h, which is the
    /// relative tolerance on h itself.
    pub rel_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rel_tol: 1e-12,
            max_iter: 100,
        }
    }
}

impl SolverSettings {
    pub(crate) fn check(&self) -> Result<(), KernelError> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(KernelError::InvalidSettings);
        }
        Ok(())
    }
}

fn check_h(h: f64) -> Result<(), KernelError> {
    if !h.is_finite() {
        return Err(KernelError::NonFinite { what: "h" });
    }
    if h <= 0.0 {
        return Err(KernelError::NonPositiveH { h });
    }
    Ok(())
}

/// Inverse profile: the x at which the family passes through h.
///
/// Series families evaluate ln h + sum (a_k/k)(h^k - 1) directly; the logistic
/// uses the stable closed form ln h - ln(2 - h). Errors: `NonPositiveH`,
/// `LogisticOutOfRange` (h >= 2), `Overflow` when h^k leaves f64 range, and
/// `UnsupportedFamily` for the Gompertz reference.
pub fn x_of_h(family: &GrowthFamily, h: f64) -> Result<f64, KernelError> {
    check_h(h)?;
    match family.series_terms()? {
        Some(terms) => solve::series_x(&terms, h.ln()),
        None => match family {
            GrowthFamily::Logistic => {
                if h >= 2.0 {
                    Err(KernelError::LogisticOutOfRange { h })
                } else {
                    // 2 - h is exact for h in [1, 2); no cancellation near the
                    // carrying bound, unlike -ln(2/h - 1)
                    Ok(h.ln() - (2.0 - h).ln())
                }
            }
            _ => Err(KernelError::UnsupportedFamily {
                op: "x_of_h",
                family: family.name(),
            }),
        },
    }
}

/// Profile value h at dimensionless offset x from the hindering point.
///
/// Series families invert the defining relation with a bracketed Newton
/// iteration in u = ln h (the root is unique because the left side is strictly
/// increasing); logistic and exponential use closed forms.
pub fn h_of_x(family: &GrowthFamily, x: f64, settings: &SolverSettings) -> Result<f64, KernelError> {
    if !x.is_finite() {
        return Err(KernelError::NonFinite { what: "x" });
    }
    settings.check()?;
    match family.series_terms()? {
        Some(terms) => {
            if terms.is_empty() {
                // exponential baseline: ln h = x
                let h = x.exp();
                if h.is_finite() && h > 0.0 {
                    Ok(h)
                } else {
                    Err(KernelError::Overflow)
                }
            } else {
                solve::solve_u(&terms, x, settings, None).map(f64::exp)
            }
        }
        None => match family {
            GrowthFamily::Logistic => Ok(2.0 / (1.0 + (-x).exp())),
            _ => Err(KernelError::UnsupportedFamily {
                op: "h_of_x",
                family: family.name(),
            }),
        },
    }
}

/// Profile slope dh/dx expressed through h: h / (1 + sum a_k h^k) for series
/// families, h (1 - h/2) for the logistic, h for the exponential baseline.
/// Equals 1/2 at h = 1 for every hindered family.
pub fn dh_dx(family: &GrowthFamily, h: f64) -> Result<f64, KernelError> {
    Ok(h * growth_rate_factor(family, h)?)
}

/// Rate suppression g / g_u = 1 / (1 + f(h)) as a function of h.
///
/// Saturates to 0 when the series overflows (the true value underflows f64).
/// The logistic accepts h = 2 inclusively so trajectories evaluated at the
/// carrying bound report a vanishing rate instead of failing.
pub fn growth_rate_factor(family: &GrowthFamily, h: f64) -> Result<f64, KernelError> {
    check_h(h)?;
    match family.series_terms()? {
        Some(terms) => Ok(1.0 / (1.0 + solve::series_f(&terms, h.ln()))),
        None => match family {
            GrowthFamily::Logistic => {
                if h > 2.0 {
                    Err(KernelError::LogisticOutOfRange { h })
                } else {
                    Ok(1.0 - h / 2.0)
                }
            }
            _ => Err(KernelError::UnsupportedFamily {
                op: "growth_rate_factor",
                family: family.name(),
            }),
        },
    }
}

/// Hindering transform f(h) = sum a_k h^k; h / (2 - h) for the logistic;
/// identically 0 for the exponential baseline.
pub fn f_transform(family: &GrowthFamily, h: f64) -> Result<f64, KernelError> {
    check_h(h)?;
    match family.series_terms()? {
        Some(terms) => {
            let f = solve::series_f(&terms, h.ln());
            if f.is_finite() {
                Ok(f)
            } else {
                Err(KernelError::Overflow)
            }
        }
        None => match family {
            GrowthFamily::Logistic => {
                if h >= 2.0 {
                    Err(KernelError::LogisticOutOfRange { h })
                } else {
                    Ok(h / (2.0 - h))
                }
            }
            _ => Err(KernelError::UnsupportedFamily {
                op: "f_transform",
                family: family.name(),
            }),
        },
    }
}

/// Dimensional hindering coefficients alpha_k = a_k / Q_h^k, which turn the
/// dimensionless weights into the series in physical magnitude Q.
pub fn alpha_coefficients(
    weights: &HinderingWeights,
    q_h: f64,
) -> Result<Vec<(u32, f64)>, KernelError> {
    if !q_h.is_finite() || q_h <= 0.0 {
        return Err(KernelError::NonPositiveQh);
    }
    Ok(weights
        .terms()
        .iter()
        .map(|&(k, a)| (k, a / q_h.powi(k as i32)))
        .collect())
}

/// Rise-vs-approach asymmetry a(x) = (h(x) - 1) / (1 - h(-x)) - 1.
///
/// Zero for every x in the logistic case (the only symmetric member) and zero
/// at x = 0 by the shared boundary slope; returned exactly as 0 there, where
/// the raw expression is 0/0.
pub fn asymmetry(
    family: &GrowthFamily,
    x: f64,
    settings: &SolverSettings,
) -> Result<f64, KernelError> {
    if !x.is_finite() {
        return Err(KernelError::NonFinite { what: "x" });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let up = h_of_x(family, x, settings)?;
    let down = h_of_x(family, -x, settings)?;
    Ok((up - 1.0) / (1.0 - down) - 1.0)
}

/// Which closed-form asymptote of the profile to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticSide {
    /// Deep unhindered regime x << 0.
    Unhindered,
    /// Deep hindered regime x >> 0.
    Hindered,
}

/// Asymptotic profile forms: e^(x + 1/k) and (1 + k x)^(1/k) for a single
/// term of order k; 2 e^x and 2 (1 - e^-x) for the logistic.
pub fn asymptotic(
    family: &GrowthFamily,
    x: f64,
    side: AsymptoticSide,
) -> Result<f64, KernelError> {
    if !x.is_finite() {
        return Err(KernelError::NonFinite { what: "x" });
    }
    match family {
        GrowthFamily::SingleTerm { k } => {
            if *k == 0 || *k > MAX_ORDER {
                return Err(KernelError::InvalidOrder { k: *k });
            }
            let kf = *k as f64;
            match side {
                AsymptoticSide::Unhindered => Ok((x + 1.0 / kf).exp()),
                AsymptoticSide::Hindered => {
                    let base = 1.0 + kf * x;
                    if base <= 0.0 {
                        Err(KernelError::OutOfDomain {
                            what: "hindered asymptote needs 1 + k x > 0",
                        })
                    } else {
                        Ok(base.powf(1.0 / kf))
                    }
                }
            }
        }
        GrowthFamily::Logistic => Ok(match side {
            AsymptoticSide::Unhindered => 2.0 * x.exp(),
            AsymptoticSide::Hindered => 2.0 * (1.0 - (-x).exp()),
        }),
        _ => Err(KernelError::UnsupportedFamily {
            op: "asymptotic",
            family: family.name(),
        }),
    }
}

/// Location and value of the interior maximum of h' for a single term of
/// order k >= 2:
///
/// ```text
/// x_peak = -(1/k) [ln(k - 1) + (k - 2)/(k - 1)],
/// value  = k^(-1/k) (1 - 1/k)^(1 - 1/k).
/// ```
///
/// For k = 1 the slope increases monotonically toward 1 and there is no
/// interior peak (`NoPeak`). The peak sits at h = (k - 1)^(-1/k), left of the
/// hindering point for every finite k; the leftmost location over all orders
/// is x ~ -0.441 at k = 4.
pub fn derivative_peak(k: u32) -> Result<(f64, f64), KernelError> {
    if k == 0 {
        return Err(KernelError::InvalidOrder { k });
    }
    if k == 1 {
        return Err(KernelError::NoPeak);
    }
    let kf = k as f64;
    let x = -((kf - 1.0).ln() + (kf - 2.0) / (kf - 1.0)) / kf;
    let v = kf.powf(-1.0 / kf) * (1.0 - 1.0 / kf).powf(1.0 - 1.0 / kf);
    Ok((x, v))
}

/// Peak of the logistic slope: 1/2, attained at x = 0 (h = 1).
pub fn logistic_derivative_peak() -> (f64, f64) {
    (0.0, 0.5)
}
