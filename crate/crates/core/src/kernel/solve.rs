//! Root solver for the implicit profile relation, working in u = ln h.
//!
//! With F(u) = u + sum_k (a_k / k) (e^(k u) - 1) - x, the profile solve is
//! F(u) = 0. F is strictly increasing (F' = 1 + sum a_k e^(k u) > 0), so the
//! root is unique and bracketable. Working in u keeps h^k = e^(k u) from
//! overflowing for deeply hindered arguments and makes the step tolerance a
//! relative tolerance on h.

use super::{KernelError, SolverSettings};

/// exp() argument beyond which the result leaves f64 range.
const EXP_LIMIT: f64 = 709.0;

/// F(u) and F'(u); saturates to +inf past the overflow guard so the
/// safeguarded iteration treats the region as "above the root".
fn eval(terms: &[(f64, f64)], u: f64, x: f64) -> (f64, f64) {
    let mut val = u - x;
    let mut slope = 1.0;
    for &(k, a) in terms {
        let e = k * u;
        if e > EXP_LIMIT {
            return (f64::INFINITY, f64::INFINITY);
        }
        let em1 = e.exp_m1();
        val += a / k * em1;
        slope += a * (em1 + 1.0);
    }
    (val, slope)
}

/// Forward map x(u) = u + sum (a_k / k)(e^(k u) - 1), failing on overflow.
pub(crate) fn series_x(terms: &[(f64, f64)], u: f64) -> Result<f64, KernelError> {
    let (val, _) = eval(terms, u, 0.0);
    if val.is_finite() {
        Ok(val)
    } else {
        Err(KernelError::Overflow)
    }
}

/// Hindering transform f = sum a_k e^(k u); +inf past the overflow guard,
/// where the suppression factor 1/(1 + f) correctly rounds to zero.
pub(crate) fn series_f(terms: &[(f64, f64)], u: f64) -> f64 {
    let mut f = 0.0;
    for &(k, a) in terms {
        let e = k * u;
        if e > EXP_LIMIT {
            return f64::INFINITY;
        }
        f += a * e.exp();
    }
    f
}

/// Solves F(u) = 0 by Newton iteration with a bracketed fallback.
///
/// F is strictly increasing and convex (F'' = sum a_k k e^(k u) > 0), so
/// undamped Newton converges from any finite start: a step from the left
/// of the root lands at or right of it, and from the right the iterates
/// decrease monotonically. The fast path below runs exactly that, one
/// evaluation per step, and terminates when the step in u drops below
/// `rel_tol` (a relative tolerance on h). It abandons ship only when an
/// evaluation saturates to +inf or the iteration budget runs out, and
/// those cases rerun under a bracket safeguard.
pub(crate) fn solve_u(
    terms: &[(f64, f64)],
    x: f64,
    settings: &SolverSettings,
    warm: Option<f64>,
) -> Result<f64, KernelError> {
    settings.check()?;
    let start = warm.unwrap_or(0.0);
    // a warm start sits near the root, where undamped Newton needs only
    // a handful of steps; a cold start far from the root would crawl at
    // 1/k per step through the exponential regime, so it goes straight
    // to the bracketed path
    if warm.is_some() {
        let mut u = start;
        for _ in 0..20.min(settings.max_iter) {
            let (f, fp) = eval(terms, u, x);
            if !f.is_finite() {
                break;
            }
            if f == 0.0 {
                return Ok(u);
            }
            // fp >= 1, so the step is finite whenever f is
            let next = u - f / fp;
            let delta = (next - u).abs();
            u = next;
            if delta <= settings.rel_tol {
                return Ok(u);
            }
        }
    }
    solve_u_bracketed(terms, x, settings, start)
}

/// The safeguarded slow path: a bracket grown geometrically from the
/// start point until it straddles the root, then Newton steps clipped to
/// the bracket with bisection as the fallback. Reached only from starts
/// whose first Newton trajectory hit the overflow guard.
fn solve_u_bracketed(
    terms: &[(f64, f64)],
    x: f64,
    settings: &SolverSettings,
    start: f64,
) -> Result<f64, KernelError> {
    let (f_start, fp_start) = eval(terms, start, x);
    if f_start == 0.0 {
        return Ok(start);
    }

    let mut lo;
    let mut hi;
    let mut step = 1.0f64;
    if f_start < 0.0 {
        lo = start;
        hi = start + step;
        while eval(terms, hi, x).0 < 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            if !hi.is_finite() {
                return Err(KernelError::Overflow);
            }
        }
    } else {
        hi = start;
        lo = start - step;
        while eval(terms, lo, x).0 > 0.0 {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if !lo.is_finite() {
                return Err(KernelError::Overflow);
            }
        }
    }

    // F is convex and increasing, so Newton converges from any point in
    // the bracket; the start is the best guess available (a warm start
    // sits within a grid step of the root), so iterate from there rather
    // than from the bracket midpoint, reusing its already-computed value
    let mut u = start;
    let mut first = Some((f_start, fp_start));
    for _ in 0..settings.max_iter {
        let (f, fp) = match first.take() {
            Some(cached) => cached,
            None => eval(terms, u, x),
        };
        if f == 0.0 {
            return Ok(u);
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let newton = u - f / fp;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let delta = (next - u).abs();
        u = next;
        if delta <= settings.rel_tol {
            return Ok(u);
        }
    }
    Err(KernelError::NoConvergence {
        max_iter: settings.max_iter,
    })
}
