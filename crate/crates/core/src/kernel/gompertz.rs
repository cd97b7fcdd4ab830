//! Gompertz reference curve Q(t) = K exp(-b e^(-t/tau)).
//!
//! Kept for comparison only. Its magnitude-dependent rate g(Q) =
//! ln(K/Q) / tau grows without bound as Q -> 0, one decade of ln(K/Q) per
//! decade of Q, so no finite unhindered rate g_u exists and the curve can
//! never be expressed as a hindering family.

use super::KernelError;

fn check_param(value: f64, name: &'static str) -> Result<(), KernelError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(KernelError::GompertzParameter { name });
    }
    Ok(())
}

/// Q(t) = K exp(-b e^(-t/tau)); at t = 0 this is K e^-b.
pub fn gompertz_eval(b: f64, tau: f64, capacity: f64, t: f64) -> Result<f64, KernelError> {
    check_param(b, "b")?;
    check_param(tau, "tau")?;
    check_param(capacity, "capacity")?;
    if !t.is_finite() {
        return Err(KernelError::NonFinite { what: "t" });
    }
    Ok(capacity * (-b * (-t / tau).exp()).exp())
}

/// Magnitude form of the rate, g(Q) = ln(K/Q) / tau, for 0 < Q <= K.
pub fn gompertz_rate_of_q(tau: f64, capacity: f64, q: f64) -> Result<f64, KernelError> {
    check_param(tau, "tau")?;
    check_param(capacity, "capacity")?;
    if !q.is_finite() || q <= 0.0 {
        return Err(KernelError::OutOfDomain {
            what: "Gompertz rate needs Q > 0",
        });
    }
    if q > capacity {
        return Err(KernelError::OutOfDomain {
            what: "Gompertz rate needs Q <= capacity",
        });
    }
    Ok((capacity / q).ln() / tau)
}

/// Time form of the rate, g(t) = (b/tau) e^(-t/tau).
pub fn gompertz_rate_of_t(b: f64, tau: f64, t: f64) -> Result<f64, KernelError> {
    check_param(b, "b")?;
    check_param(tau, "tau")?;
    if !t.is_finite() {
        return Err(KernelError::NonFinite { what: "t" });
    }
    Ok(b / tau * (-t / tau).exp())
}
