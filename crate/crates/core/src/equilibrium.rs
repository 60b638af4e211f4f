//! Phase structure: the critical inverse temperature, the ordered mean-field
//! branch `s(beta)`, the equilibrium macrostates and the rapid-mixing
//! threshold `beta_s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::alpha_diag;
use crate::model::{require_q_at_least_3, ProbVector};

/// Half-width of the window in which `beta` is labelled critical.
pub const CRITICAL_WINDOW: f64 = 1e-9;

/// `beta_c(q) = (2(q-1)/(q-2)) log(q-1)`.
pub fn beta_critical(q: usize) -> Result<f64> {
    require_q_at_least_3(q)?;
    let qf = q as f64;
    Ok(2.0 * (qf - 1.0) / (qf - 2.0) * (qf - 1.0).ln())
}

/// `phi(s) = (1 + (q-1)s, 1 - s, ..., 1 - s) / q`.
pub fn phi(s: f64, q: usize) -> Result<ProbVector> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("s = {s} outside [0, 1]")));
    }
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q = {q}")));
    }
    let qf = q as f64;
    let mut w = vec![(1.0 - s) / qf; q];
    w[0] = (1.0 + (qf - 1.0) * s) / qf;
    ProbVector::new(w)
}

/// Right-hand side of the mean-field equation
/// `s = (1 - e^{-beta s}) / (1 + (q-1) e^{-beta s})`.
pub fn mean_field_map(s: f64, beta: f64, q: usize) -> f64 {
    let e = (-beta * s).exp();
    (1.0 - e) / (1.0 + (q as f64 - 1.0) * e)
}

/// Largest root of the mean-field equation. `nontrivial` is false when the
/// only root in `[0, 1]` is `s = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldRoot {
    pub s: f64,
    pub nontrivial: bool,
    pub residual: f64,
}

pub fn solve_s(beta: f64, q: usize, tol: f64) -> Result<MeanFieldRoot> {
    require_q_at_least_3(q)?;
    largest_root(beta, q, tol)
}

/// Same as [`solve_s`] without the `q >= 3` restriction.
pub(crate) fn largest_root(beta: f64, q: usize, tol: f64) -> Result<MeanFieldRoot> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta}")));
    }
    let r = |s: f64| mean_field_map(s, beta, q) - s;
    let trivial = MeanFieldRoot {
        s: 0.0,
        nontrivial: false,
        residual: 0.0,
    };

    // r(1) < 0 always. Locate the largest positive value of r on (0, 1).
    const GRID: usize = 4000;
    let (mut best_s, mut best_r) = (0.0, f64::NEG_INFINITY);
    for i in 1..GRID {
        let s = i as f64 / GRID as f64;
        let v = r(s);
        if v > best_r {
            best_s = s;
            best_r = v;
        }
    }
    if best_r < 0.0 {
        // Refine: the positive region may be thinner than the grid spacing.
        let h = 1.0 / GRID as f64;
        let (mut a, mut b) = ((best_s - h).max(0.0), (best_s + h).min(1.0));
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if r(c) > r(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best_s = 0.5 * (a + b);
        best_r = r(best_s);
        if best_r < 0.0 || best_s <= 0.0 {
            return Ok(trivial);
        }
    }

    // Bracket [best_s, hi] with r(best_s) >= 0 > r(hi); the largest sign
    // change lies beyond the last grid point with r >= 0.
    let mut lo = best_s;
    let mut i = (best_s * GRID as f64).ceil() as usize;
    while i < GRID {
        let s = i as f64 / GRID as f64;
        if r(s) >= 0.0 {
            lo = s;
        }
        i += 1;
    }
    let mut hi = ((lo * GRID as f64).floor() + 1.0) / GRID as f64;
    hi = hi.min(1.0);
    if lo <= 0.0 {
        return Ok(trivial);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let residual = r(s).abs();
    if residual > tol {
        return Err(Error::NoConvergence {
            message: format!("mean-field residual {residual:e} above tolerance {tol:e}"),
            trace: vec![format!("beta={beta} q={q} bracket=[{lo}, {hi}]")],
        });
    }
    Ok(MeanFieldRoot {
        s,
        nontrivial: true,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Equilibrium macrostates at one inverse temperature. Every macrostate
/// `nu` stands for the diagonal pair `(nu, nu)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub beta: f64,
    pub s: f64,
    pub regime: Regime,
    pub macrostates: Vec<ProbVector>,
    /// `alpha_diag(rho)`.
    pub alpha_uniform: f64,
    /// `alpha_diag(phi(s))`, equal to `alpha_uniform` when `s = 0`.
    pub alpha_ordered: f64,
}

pub fn macrostates(beta: f64, q: usize, tol: f64) -> Result<PhasePoint> {
    macrostates_with_window(beta, q, tol, CRITICAL_WINDOW)
}

pub fn macrostates_with_window(
    beta: f64,
    q: usize,
    tol: f64,
    window: f64,
) -> Result<PhasePoint> {
    let beta_c = beta_critical(q)?;
    let root = solve_s(beta, q, tol)?;
    let rho = ProbVector::uniform(q);
    let ordered = phi(root.s, q)?;
    let alpha_uniform = alpha_diag(beta, &rho);
    let alpha_ordered = alpha_diag(beta, &ordered);
    let regime = if (beta - beta_c).abs() <= window {
        Regime::Critical
    } else if beta < beta_c {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    };
    let permutations = || (0..q).map(|i| ordered.swapped(0, i));
    let macrostates = match regime {
        Regime::Subcritical => vec![rho],
        Regime::Supercritical => permutations().collect(),
        Regime::Critical => std::iter::once(rho).chain(permutations()).collect(),
    };
    Ok(PhasePoint {
        beta,
        s: root.s,
        regime,
        macrostates,
        alpha_uniform,
        alpha_ordered,
    })
}

/// `beta*(t)`: the inverse temperature at which the reduced drift
/// `h(t) = g_1(t, (1-t)/(q-1), ...) - t` vanishes, for `t` in `(1/q, 1)`.
/// The drift is negative at `t` exactly when `beta < beta*(t)`.
pub fn drift_zero_beta(t: f64, q: usize) -> f64 {
    let qf = q as f64;
    (qf - 1.0) * ((qf - 1.0) * t / (1.0 - t)).ln() / (qf * t - 1.0)
}

/// `h(t)` and `h'(t)` for the reduced one-dimensional drift.
fn reduced_drift(beta: f64, t: f64, q: usize) -> (f64, f64, f64, f64, f64, f64) {
    let qf = q as f64;
    let u = beta * (qf * t - 1.0) / (qf - 1.0);
    let g = 1.0 / (1.0 + (qf - 1.0) * (-u).exp());
    let var = g * (1.0 - g);
    let du_dt = beta * qf / (qf - 1.0);
    let du_db = (qf * t - 1.0) / (qf - 1.0);
    let h = g - t;
    let ht = var * du_dt - 1.0;
    let dvar_du = var * (1.0 - 2.0 * g);
    let h_b = var * du_db;
    let ht_b = dvar_du * du_db * du_dt + var * qf / (qf - 1.0);
    let ht_t = dvar_du * du_dt * du_dt;
    (h, ht, h_b, ht, ht_b, ht_t)
}

/// Rapid-mixing threshold `beta_s(q)`: the supremum of `beta` for which
/// `g_k(x) < x_k` whenever `x_k > 1/q`.
///
/// For fixed `x_k = t` the remaining coordinates are worst when equal, so the
/// threshold is the tangency `h(t) = h'(t) = 0` of the reduced drift. Solved
/// by 2D Newton from the minimum of `beta*(t)` on a coarse grid, with a
/// bisection on `d beta*/dt` as fallback.
pub fn beta_mixing(q: usize, tol: f64) -> Result<f64> {
    beta_mixing_with_grid(q, tol, 400)
}

pub fn beta_mixing_with_grid(q: usize, tol: f64, grid: usize) -> Result<f64> {
    require_q_at_least_3(q)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let qf = q as f64;
    let t_lo = 1.0 / qf;
    let mut trace = Vec::new();

    let mut best = (f64::INFINITY, 0.5);
    for i in 1..grid {
        let t = t_lo + (1.0 - t_lo) * i as f64 / grid as f64;
        let b = drift_zero_beta(t, q);
        if b < best.0 {
            best = (b, t);
        }
    }
    trace.push(format!("grid minimum beta*={:.9} at t={:.9}", best.0, best.1));

    let (mut beta, mut t) = best;
    for iter in 0..100 {
        let (h, ht, h_b, h_t, ht_b, ht_t) = reduced_drift(beta, t, q);
        if h.abs().max(ht.abs()) < tol * 1e-3 {
            trace.push(format!("newton converged after {iter} iterations"));
            if t > t_lo && t < 1.0 {
                return Ok(beta);
            }
            break;
        }
        let det = h_b * ht_t - h_t * ht_b;
        if det.abs() < 1e-300 {
            trace.push("singular Jacobian".into());
            break;
        }
        let d_beta = (h * ht_t - h_t * ht) / det;
        let d_t = (h_b * ht - h * ht_b) / det;
        beta -= d_beta;
        t -= d_t;
        trace.push(format!("newton {iter}: beta={beta:.12} t={t:.12}"));
        if !(t > t_lo && t < 1.0 && beta.is_finite()) {
            trace.push("newton left the domain".into());
            break;
        }
    }

    // Fallback: bisection on the slope of beta*(t).
    let slope = |t: f64| {
        let e = 1e-7;
        (drift_zero_beta(t + e, q) - drift_zero_beta(t - e, q)) / (2.0 * e)
    };
    let step = (1.0 - t_lo) / grid as f64;
    let (mut a, mut b) = ((best.1 - step).max(t_lo + 1e-9), (best.1 + step).min(1.0 - 1e-9));
    if !(slope(a) < 0.0 && slope(b) > 0.0) {
        return Err(Error::NoConvergence {
            message: format!("no tangency bracket for q = {q}"),
            trace,
        });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    trace.push(format!("bisection bracket [{a}, {b}]"));
    Ok(drift_zero_beta(0.5 * (a + b), q))
}
