//! Large-deviation quantities on `P_q x P_q`: relative entropy, the
//! exponent `alpha_beta`, the rate function, the log moment generating
//! function and the free energy functional, plus the duality diagnostic
//! between the maximum of `alpha_beta` and the minimum of the free energy
//! functional on the diagonal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{largest_root, phi};
use crate::error::{Error, Result};
use crate::model::{dot, ProbVector};

/// Slack allowed when a sampled `alpha` exceeds the supplied supremum.
pub const RATE_CONSISTENCY_TOL: f64 = 1e-9;

/// `R(nu | reference) = sum nu_k log(nu_k / ref_k)` with `0 log 0 = 0`.
/// Returns `+inf` when `nu` charges a coordinate the reference does not.
pub fn relative_entropy(nu: &ProbVector, reference: &ProbVector) -> f64 {
    assert_eq!(nu.len(), reference.len(), "dimension mismatch");
    let mut total = 0.0;
    for (&p, &r) in nu.weights().iter().zip(reference.weights()) {
        if p == 0.0 {
            continue;
        }
        if r == 0.0 {
            return f64::INFINITY;
        }
        total += p * (p / r).ln();
    }
    total
}

/// `R(nu | rho)` against the uniform vector.
fn entropy_vs_uniform(nu: &ProbVector) -> f64 {
    let q = nu.len() as f64;
    nu.weights()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * (p * q).ln())
        .sum()
}

/// `alpha_beta(gamma, nu) = beta <gamma, nu> - R(gamma | rho) - R(nu | rho)`.
pub fn alpha(beta: f64, gamma: &ProbVector, nu: &ProbVector) -> f64 {
    assert_eq!(gamma.len(), nu.len(), "dimension mismatch");
    beta * gamma.dot(nu) - entropy_vs_uniform(gamma) - entropy_vs_uniform(nu)
}

/// `alpha_beta(gamma) = (beta/2) <gamma, gamma> - R(gamma | rho)`.
pub fn alpha_diag(beta: f64, gamma: &ProbVector) -> f64 {
    0.5 * beta * gamma.dot(gamma) - entropy_vs_uniform(gamma)
}

/// `alpha_diag(gamma) + alpha_diag(nu) - (beta/2) |gamma - nu|^2`.
pub fn alpha_split(beta: f64, gamma: &ProbVector, nu: &ProbVector) -> f64 {
    let sq: f64 = gamma
        .weights()
        .iter()
        .zip(nu.weights())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    alpha_diag(beta, gamma) + alpha_diag(beta, nu) - 0.5 * beta * sq
}

/// `I_beta(gamma, nu) = sup alpha - alpha(gamma, nu)`.
pub fn rate_function(beta: f64, gamma: &ProbVector, nu: &ProbVector, sup_alpha: f64) -> Result<f64> {
    let a = alpha(beta, gamma, nu);
    let rate = sup_alpha - a;
    if rate < -RATE_CONSISTENCY_TOL {
        return Err(Error::Inconsistent(format!(
            "alpha = {a} exceeds the supplied supremum {sup_alpha}"
        )));
    }
    Ok(rate.max(0.0))
}

/// `log((1/q) sum exp(x_i))`, stabilized.
pub fn log_mean_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = x.iter().map(|&v| (v - m).exp()).sum();
    m + (s / x.len() as f64).ln()
}

/// `Gamma(x, y) = log((1/q) sum e^{x_i}) + log((1/q) sum e^{y_i})`.
pub fn lmgf(x: &[f64], y: &[f64]) -> f64 {
    log_mean_exp(x) + log_mean_exp(y)
}

fn scaled(beta: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| beta * v).collect()
}

/// `G_beta(x, y) = beta <x, y> - Gamma(beta x, beta y)`.
pub fn free_energy_functional(beta: f64, x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dimension mismatch");
    beta * dot(x, y) - lmgf(&scaled(beta, x), &scaled(beta, y))
}

/// `G_beta(x) = (beta/2) <x, x> - log((1/q) sum e^{beta x_i})`.
pub fn free_energy_single(beta: f64, x: &[f64]) -> f64 {
    0.5 * beta * dot(x, x) - log_mean_exp(&scaled(beta, x))
}

/// `G_beta(x) + G_beta(y) - (beta/2) |x - y|^2`.
pub fn free_energy_split(beta: f64, x: &[f64], y: &[f64]) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    free_energy_single(beta, x) + free_energy_single(beta, y) - 0.5 * beta * sq
}

/// Gradient of `G_beta(x)`: `beta (x - softmax(beta x))`.
pub fn free_energy_single_gradient(beta: f64, x: &[f64]) -> Vec<f64> {
    let g = softmax(&scaled(beta, x));
    x.iter().zip(g).map(|(a, b)| beta * (a - b)).collect()
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `sup alpha_beta` over `P_q x P_q`, attained on the diagonal at `rho` or at
/// `phi(s(beta))`.
pub fn sup_alpha(beta: f64, q: usize) -> Result<f64> {
    let root = largest_root(beta, q, 1e-13)?;
    let rho = alpha_diag(beta, &ProbVector::uniform(q));
    let ordered = alpha_diag(beta, &phi(root.s, q)?);
    Ok(2.0 * rho.max(ordered))
}

/// Free energy `psi(beta) = -(1/beta) sup alpha_beta`, for `beta > 0`.
pub fn free_energy(beta: f64, q: usize) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "free energy needs beta > 0, got {beta}"
        )));
    }
    Ok(-sup_alpha(beta, q)? / beta)
}

/// Result of the diagonal descent for `inf_x G_beta(x, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMinimum {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub starts: usize,
}

fn descend(beta: f64, start: Vec<f64>, grad_tol: f64, trace: &mut Vec<String>) -> Option<Vec<f64>> {
    let mut x = start;
    let mut f = free_energy_single(beta, &x);
    let mut step = 1.0 / beta;
    for iter in 0..200_000 {
        let g = free_energy_single_gradient(beta, &x);
        let gn = dot(&g, &g).sqrt();
        if gn <= grad_tol {
            return Some(x);
        }
        // Armijo backtracking from the 1/beta step (gradient is beta-Lipschitz).
        let mut t = step;
        loop {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let fc = free_energy_single(beta, &cand);
            // Close to the minimum the Armijo decrease drops below the
            // resolution of f; fall back to shrinking the gradient norm.
            let accept = fc <= f - 0.5 * t * gn * gn
                || (gn < 1e-6 && {
                    let gc = free_energy_single_gradient(beta, &cand);
                    dot(&gc, &gc).sqrt() < gn
                });
            if accept {
                x = cand;
                f = fc;
                break;
            }
            if t < 1e-16 {
                // No representable decrease left; accept if already flat.
                return (gn < 1e-6).then_some(x);
            }
            t *= 0.5;
        }
        step = (t * 2.0).min(1.0 / beta);
        if iter % 20_000 == 0 {
            trace.push(format!("iter {iter}: G={f:.15} |grad|={gn:e}"));
        }
    }
    None
}

/// `inf_{x in R^q} G_beta(x, x)` by multi-start gradient descent.
pub fn inf_free_energy_diagonal(beta: f64, q: usize) -> Result<DiagonalMinimum> {
    if beta == 0.0 {
        return Ok(DiagonalMinimum {
            value: 0.0,
            argmin: vec![1.0 / q as f64; q],
            starts: 1,
        });
    }
    let mut starts: Vec<Vec<f64>> = vec![ProbVector::uniform(q).weights().to_vec()];
    for k in 0..q {
        starts.push(ProbVector::vertex(q, k).weights().to_vec());
    }
    let root = largest_root(beta, q, 1e-12)?;
    if root.nontrivial {
        let ordered = phi(root.s, q)?;
        for k in 0..q {
            starts.push(ordered.swapped(0, k).weights().to_vec());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..8 {
        starts.push((0..q).map(|_| rng.random_range(-1.0..2.0)).collect());
    }

    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let count = starts.len();
    for start in starts {
        let Some(x) = descend(beta, start, 1e-10, &mut trace) else {
            return Err(Error::NoConvergence {
                message: format!("diagonal descent stalled at beta = {beta}"),
                trace,
            });
        };
        let v = 2.0 * free_energy_single(beta, &x);
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let (value, argmin) = best.expect("at least one start");
    Ok(DiagonalMinimum {
        value,
        argmin,
        starts: count,
    })
}

/// `|sup alpha_beta + inf_x G_beta(x, x)|`.
pub fn duality_gap(beta: f64, q: usize) -> Result<f64> {
    let sup = sup_alpha(beta, q)?;
    let inf = inf_free_energy_diagonal(beta, q)?;
    Ok((sup + inf.value).abs())
}

/// One point of a free-energy landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSample {
    pub gamma: ProbVector,
    pub nu: ProbVector,
    pub alpha: f64,
    pub rate: f64,
}

/// `alpha(gamma, gamma)` and the rate function on a barycentric grid of the
/// `q = 3` simplex with `steps` subdivisions per edge.
pub fn diagonal_landscape(beta: f64, steps: usize) -> Result<Vec<LandscapeSample>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("grid needs at least one step".into()));
    }
    let sup = sup_alpha(beta, 3)?;
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=steps - i {
            let k = steps - i - j;
            let s = steps as f64;
            let gamma = ProbVector::new(vec![i as f64 / s, j as f64 / s, k as f64 / s])?;
            let a = alpha(beta, &gamma, &gamma);
            let rate = (sup - a).max(0.0);
            out.push(LandscapeSample {
                nu: gamma.clone(),
                gamma,
                alpha: a,
                rate,
            });
        }
    }
    Ok(out)
}
