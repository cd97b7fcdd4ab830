//! Derivative-free minimization for the relative-residual objective.
//!
//! A standard Nelder-Mead simplex with the Lagarias coefficient set. The
//! objective is treated as a black box that may return +inf for infeasible
//! parameter vectors (overflowing exponentials, solver failures); the
//! simplex simply moves away from such vertices. Everything is
//! deterministic: no randomness, no time-dependent behavior, so a fit is
//! reproducible bit-for-bit across runs and thread counts.

pub(crate) struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    /// True when the simplex collapsed below the diameter tolerance
    /// before the iteration budget ran out.
    pub converged: bool,
}

// Lagarias et al. coefficients for reflection, expansion, contraction
// and shrink.
const RHO: f64 = 1.0;
const CHI: f64 = 2.0;
const GAMMA: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Relative infinity-norm diameter of the simplex around its best vertex.
fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut d = 0.0f64;
    for v in &simplex[1..] {
        for (a, b) in v.iter().zip(best) {
            d = d.max((a - b).abs());
        }
    }
    d / scale
}

/// Minimizes `f` from `start`, stepping `init_step[i]` along each axis to
/// build the initial simplex. Convergence is a relative simplex diameter
/// below `tol`.
pub(crate) fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    init_step: &[f64],
    tol: f64,
    max_iter: u32,
) -> NmResult {
    let dim = start.len();
    debug_assert_eq!(init_step.len(), dim);
    // NaN would corrupt the vertex ordering; treat it as infeasible
    let mut eval = move |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += init_step[i];
        simplex.push(v);
    }
    let mut fx: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut converged = false;
    for _ in 0..max_iter {
        // order so that vertex 0 is best, vertex dim is worst
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        let reordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let refx: Vec<f64> = idx.iter().map(|&i| fx[i]).collect();
        simplex = reordered;
        fx = refx;

        if diameter(&simplex) < tol {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, a) in centroid.iter_mut().zip(v) {
                *c += a;
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }

        let worst = simplex[dim].clone();
        let lerp = |from: &[f64], towards: &[f64], w: f64| -> Vec<f64> {
            from.iter().zip(towards).map(|(a, b)| a + w * (b - a)).collect()
        };

        // reflect the worst vertex through the centroid
        let xr = lerp(&worst, &centroid, 1.0 + RHO);
        let fr = eval(&xr);

        if fr < fx[0] {
            // try expanding further in the same direction
            let xe = lerp(&worst, &centroid, 1.0 + RHO * CHI);
            let fe = eval(&xe);
            if fe < fr {
                simplex[dim] = xe;
                fx[dim] = fe;
            } else {
                simplex[dim] = xr;
                fx[dim] = fr;
            }
            continue;
        }
        if fr < fx[dim - 1] {
            simplex[dim] = xr;
            fx[dim] = fr;
            continue;
        }
        if fr < fx[dim] {
            // outside contraction
            let xc = lerp(&worst, &centroid, 1.0 + RHO * GAMMA);
            let fc = eval(&xc);
            if fc <= fr {
                simplex[dim] = xc;
                fx[dim] = fc;
                continue;
            }
        } else {
            // inside contraction
            let xc = lerp(&worst, &centroid, GAMMA);
            let fc = eval(&xc);
            if fc < fx[dim] {
                simplex[dim] = xc;
                fx[dim] = fc;
                continue;
            }
        }

        // shrink everything toward the best vertex
        for i in 1..=dim {
            let v = lerp(&simplex[i], &simplex[0], 1.0 - SIGMA);
            fx[i] = eval(&v);
            simplex[i] = v;
        }
    }

    // final ordering to surface the best vertex
    let mut best = 0;
    for i in 1..=dim {
        if fx[i] < fx[best] {
            best = i;
        }
    }
    NmResult { x: simplex.swap_remove(best), fx: fx[best], converged }
}
