//! Mixing-time measurements.
//!
//! The magnetization pair is itself a Markov chain under the dynamics, so
//! small systems are handled exactly on the lattice of pairs; the resulting
//! distance to stationarity is that of the projected chain, a lower bound on
//! the full-chain distance. Large systems are handled with coupling times,
//! which bound the full-chain distance from above.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{run_coupling, CouplingState};
use crate::equilibrium::{beta_critical, beta_mixing, largest_root, phi};
use crate::error::{Error, Result};
use crate::exact::{config_from_index, ExactEnsemble};
use crate::glauber::{softmax_scaled, ChainState, RngSpec};
use crate::kernel::{total_variation, SparseKernel};
use crate::model::{BipartiteConfig, LatticePoint, MagnetizationPair, ModelParams, SpinConfig};

/// Default bound on the number of projected states.
pub const DEFAULT_PROJECTED_CAP: usize = 100_000;

/// Up to this many projected states every state is used as a start when
/// computing `d(t)`.
pub const ALL_STARTS_LIMIT: usize = 5_000;

/// Up to this many starts the pairwise distance `dbar(t)` is taken over all
/// of them; beyond it, over the `q * q` one-hot corner pairs.
pub const DBAR_ALL_PAIRS_LIMIT: usize = 100;

/// All count vectors of length `q` summing to `n`, in lexicographic order.
pub fn lattice(q: usize, n: usize) -> Vec<LatticePoint> {
    fn rec(q: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<LatticePoint>) {
        if prefix.len() == q - 1 {
            prefix.push(left);
            out.push(LatticePoint::new(prefix.clone()).expect("nonzero counts"));
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(q, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(q, n as u32, &mut Vec::with_capacity(q), &mut out);
    out
}

/// `C(n + q - 1, q - 1)`, the size of the lattice, saturating.
pub fn lattice_size(q: usize, n: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..q as u128 {
        c = c.saturating_mul(n as u128 + i) / i;
    }
    c
}

/// Kernel of the magnetization-pair chain on `P_n x P_n`.
#[derive(Clone, Debug)]
pub struct ProjectedChain {
    params: ModelParams,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
    kernel: SparseKernel,
}

impl ProjectedChain {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_cap(params, DEFAULT_PROJECTED_CAP)
    }

    pub fn with_cap(params: ModelParams, cap: usize) -> Result<Self> {
        let (q, n) = (params.q(), params.n());
        let m = lattice_size(q, n);
        let states = m.saturating_mul(m);
        if states > cap as u128 {
            return Err(Error::Infeasible {
                states,
                cap: cap as u128,
            });
        }
        let points = lattice(q, n);
        let index: HashMap<LatticePoint, usize> =
            points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let size = points.len();
        let beta = params.beta();
        let nf = n as f64;
        let laws: Vec<Vec<f64>> = points
            .iter()
            .map(|p| softmax_scaled(&p.proportions(), beta))
            .collect();
        let moved = |p: &LatticePoint, from: usize, to: usize| -> usize {
            let mut c = p.counts().to_vec();
            c[from] -= 1;
            c[to] += 1;
            index[&LatticePoint::new(c).expect("nonzero counts")]
        };
        let rows = (0..size * size).map(|s| {
            let (iz, iw) = (s / size, s % size);
            let (z, w) = (&points[iz], &points[iw]);
            let mut row = Vec::new();
            // Left vertex with spin m resampled from g(w); right from g(z).
            for (from, &cz) in z.counts().iter().enumerate() {
                if cz == 0 {
                    continue;
                }
                for (to, &g) in laws[iw].iter().enumerate() {
                    let p = 0.5 * cz as f64 / nf * g;
                    let target = if from == to { iz } else { moved(z, from, to) };
                    row.push((target * size + iw, p));
                }
            }
            for (from, &cw) in w.counts().iter().enumerate() {
                if cw == 0 {
                    continue;
                }
                for (to, &g) in laws[iz].iter().enumerate() {
                    let p = 0.5 * cw as f64 / nf * g;
                    let target = if from == to { iw } else { moved(w, from, to) };
                    row.push((iz * size + target, p));
                }
            }
            row
        });
        let kernel = SparseKernel::from_rows(rows);
        Ok(Self {
            params,
            points,
            index,
            kernel,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kernel(&self) -> &SparseKernel {
        &self.kernel
    }

    pub fn n_states(&self) -> usize {
        self.kernel.n_states()
    }

    pub fn pair(&self, state: usize) -> MagnetizationPair {
        let size = self.points.len();
        MagnetizationPair {
            left: self.points[state / size].clone(),
            right: self.points[state % size].clone(),
        }
    }

    pub fn state_of(&self, pair: &MagnetizationPair) -> Option<usize> {
        let size = self.points.len();
        Some(self.index.get(&pair.left)? * size + self.index.get(&pair.right)?)
    }

    /// Closed-form stationary law: multinomial weights of both sides times
    /// `exp(beta <c_z, c_w> / n)`.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.params.n();
        let beta = self.params.beta();
        let log_fact: Vec<f64> = (0..=n)
            .scan(0.0, |acc, k| {
                if k > 0 {
                    *acc += (k as f64).ln();
                }
                Some(*acc)
            })
            .collect();
        let log_multi: Vec<f64> = self
            .points
            .iter()
            .map(|p| log_fact[n] - p.counts().iter().map(|&c| log_fact[c as usize]).sum::<f64>())
            .collect();
        let size = self.points.len();
        let mut logs = Vec::with_capacity(size * size);
        for (i, z) in self.points.iter().enumerate() {
            for (j, w) in self.points.iter().enumerate() {
                let agree: u64 = z
                    .counts()
                    .iter()
                    .zip(w.counts())
                    .map(|(&a, &b)| a as u64 * b as u64)
                    .sum();
                logs.push(log_multi[i] + log_multi[j] + beta * agree as f64 / n as f64);
            }
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// States whose both sides are one-hot: `q * q` corners.
    pub fn corner_states(&self) -> Vec<usize> {
        let (q, n) = (self.params.q(), self.params.n());
        let one_hot = |k: usize| {
            let mut c = vec![0u32; q];
            c[k] = n as u32;
            LatticePoint::new(c).expect("nonzero counts")
        };
        let mut out = Vec::new();
        for a in 0..q {
            for b in 0..q {
                let pair = MagnetizationPair {
                    left: one_hot(a),
                    right: one_hot(b),
                };
                out.push(self.state_of(&pair).expect("corner in lattice"));
            }
        }
        out
    }

    /// Law at time `t` of the projected chain started from `start`, for
    /// `t = 0..=t_max`.
    pub fn evolve(&self, start: usize, t_max: u64) -> Vec<Vec<f64>> {
        let mut cur = vec![0.0; self.n_states()];
        cur[start] = 1.0;
        let mut out = Vec::with_capacity(t_max as usize + 1);
        out.push(cur.clone());
        let mut next = vec![0.0; cur.len()];
        for _ in 0..t_max {
            self.kernel.push_forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            out.push(cur.clone());
        }
        out
    }
}

/// Distance to stationarity of the projected chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvCurve {
    pub times: Vec<u64>,
    /// `d(t) = max_start TV(K^t(start, .), pi)`.
    pub distances: Vec<f64>,
    /// `dbar(t) = max TV(K^t(x, .), K^t(y, .))` over pairs of starts.
    pub dbar: Vec<f64>,
    /// First `t` with `d(t) <= 1/4`, if reached by `t_max`.
    pub t_mix_quarter: Option<u64>,
    /// Number of starts maximized over for `d` and for `dbar`.
    pub starts: usize,
    pub dbar_starts: usize,
}

impl TvCurve {
    /// Largest increase `d(t+1) - d(t)`, zero for a nonincreasing curve.
    pub fn max_increase(&self) -> f64 {
        self.distances
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// `TV(K^t(s, .), pi)` for each start `s` and `t = 0..=t_max`, evaluated in
/// parallel and returned in start order.
fn per_start_distances(chain: &ProjectedChain, starts: &[usize], t_max: u64, pi: &[f64]) -> Vec<Vec<f64>> {
    starts
        .par_iter()
        .map(|&s| {
            chain
                .evolve(s, t_max)
                .iter()
                .map(|mu| total_variation(mu, pi))
                .collect()
        })
        .collect()
}

pub fn exact_tv_curve(params: ModelParams, t_max: u64) -> Result<TvCurve> {
    exact_tv_curve_with_cap(params, t_max, DEFAULT_PROJECTED_CAP)
}

pub fn exact_tv_curve_with_cap(params: ModelParams, t_max: u64, cap: usize) -> Result<TvCurve> {
    let chain = ProjectedChain::with_cap(params, cap)?;
    let pi = chain.stationary();
    let starts: Vec<usize> = if chain.n_states() <= ALL_STARTS_LIMIT {
        (0..chain.n_states()).collect()
    } else {
        chain.corner_states()
    };
    let steps = t_max as usize + 1;
    let per_start = per_start_distances(&chain, &starts, t_max, &pi);
    let distances: Vec<f64> = (0..steps)
        .map(|t| per_start.iter().map(|d| d[t]).fold(0.0, f64::max))
        .collect();

    let dbar_starts = if starts.len() <= DBAR_ALL_PAIRS_LIMIT {
        starts.clone()
    } else {
        chain.corner_states()
    };
    let laws: Vec<Vec<Vec<f64>>> = dbar_starts.par_iter().map(|&s| chain.evolve(s, t_max)).collect();
    let dbar: Vec<f64> = (0..steps)
        .into_par_iter()
        .map(|t| {
            let mut worst: f64 = 0.0;
            for i in 0..laws.len() {
                for j in i + 1..laws.len() {
                    worst = worst.max(total_variation(&laws[i][t], &laws[j][t]));
                }
            }
            worst
        })
        .collect();
    let t_mix_quarter = distances.iter().position(|&d| d <= 0.25).map(|t| t as u64);
    Ok(TvCurve {
        times: (0..=t_max).collect(),
        distances,
        dbar,
        t_mix_quarter,
        starts: starts.len(),
        dbar_starts: dbar_starts.len(),
    })
}

/// One time point of the coupling sandwich.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichPoint {
    pub t: u64,
    /// Exact projected distance `d(t)` (lower surrogate for the full chain).
    pub projected_tv: f64,
    /// Estimated `P(X_t != Y_t)` with `X_0` a configuration projecting onto
    /// the maximizing start of `d(t)` and `Y_0` drawn from the Gibbs measure:
    /// an upper bound on that start's full-chain distance.
    pub coupling_bound: f64,
    pub coupling_stderr: f64,
    /// Projected pair `X_0` was chosen from.
    pub start: MagnetizationPair,
}

impl SandwichPoint {
    pub fn holds(&self, sigmas: f64) -> bool {
        self.projected_tv <= self.coupling_bound + sigmas * self.coupling_stderr
    }
}

/// A configuration with the given magnetizations, spins laid out in blocks.
fn block_config(pair: &MagnetizationPair) -> BipartiteConfig {
    let side = |p: &LatticePoint| {
        let spins = p
            .counts()
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat(k as u8).take(c as usize))
            .collect();
        SpinConfig::new(p.q(), spins).expect("valid spins")
    };
    BipartiteConfig::new(side(&pair.left), side(&pair.right)).expect("same shape")
}

/// Checks `d(t) <= P(X_t != Y_t)` for `t = 0..=t_max`. For every `t` the
/// coupling starts from a configuration whose magnetizations attain `d(t)`;
/// `Y_0` is drawn from the exact Gibbs measure, so `Y_t` stays stationary and
/// the coupling inequality bounds that start's distance from above.
pub fn coupling_sandwich(params: ModelParams, t_max: u64, replicas: usize, seed: u64) -> Result<Vec<SandwichPoint>> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let chain = ProjectedChain::new(params)?;
    let pi = chain.stationary();
    let ens = ExactEnsemble::new(params)?;
    let starts: Vec<usize> = (0..chain.n_states()).collect();
    let curves = per_start_distances(&chain, &starts, t_max, &pi);
    let argmax: Vec<usize> = (0..=t_max as usize)
        .map(|t| {
            (0..starts.len())
                .fold(0, |best, i| if curves[i][t] > curves[best][t] { i } else { best })
        })
        .collect();
    let mut distinct = argmax.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut estimates: HashMap<usize, Vec<(f64, f64)>> = HashMap::new();
    for &s in &distinct {
        let x0 = block_config(&chain.pair(starts[s]));
        let mismatches: Vec<Vec<bool>> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngSpec::new(seed, ((s as u64) << 32) | r as u64).rng();
                let y0 = config_from_index(&params, ens.sample_index(rng.random::<f64>()));
                let mut cs = CouplingState::new(params, x0.clone(), y0).expect("matching shapes");
                let mut out = Vec::with_capacity(t_max as usize + 1);
                out.push(cs.distance() > 0);
                for _ in 0..t_max {
                    cs.step(&mut rng);
                    out.push(cs.distance() > 0);
                }
                out
            })
            .collect();
        let series = (0..=t_max as usize)
            .map(|t| {
                let hits = mismatches.iter().filter(|m| m[t]).count() as f64;
                let p = hits / replicas as f64;
                // Floor the standard error with the (k+1)/(R+2) estimate so
                // counts of 0 or R do not claim certainty.
                let pf = (hits + 1.0) / (replicas as f64 + 2.0);
                (p, (pf * (1.0 - pf) / replicas as f64).sqrt())
            })
            .collect();
        estimates.insert(s, series);
    }
    Ok((0..=t_max as usize)
        .map(|t| {
            let s = argmax[t];
            let (p, se) = estimates[&s][t];
            SandwichPoint {
                t: t as u64,
                projected_tv: curves[s][t],
                coupling_bound: p,
                coupling_stderr: se,
                start: chain.pair(starts[s]),
            }
        })
        .collect())
}

/// Least-squares fit `t = a n log n` through the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub q: usize,
    pub beta: f64,
    pub n_values: Vec<usize>,
    /// Means over the replicas that coupled.
    pub mean_coupling_times: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub timeouts: Vec<usize>,
    pub replicas: usize,
    pub slope_a: f64,
    /// `1 - SS_res / SS_tot` with the centered total sum of squares.
    pub r_squared: f64,
    pub warnings: Vec<String>,
}

/// Through-origin fit of `y` against `x`: slope and centered `R^2`, clamped
/// to `[0, 1]`.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let a = sxy / sxx;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a * u).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, r2.clamp(0.0, 1.0))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// RNG stream for replica `r` of system size `n`.
pub fn replica_stream(n: usize, r: usize) -> u64 {
    ((n as u64) << 32) | r as u64
}

/// Coupling times from all-`e^1` versus all-`e^2` starts for one system
/// size; `None` marks a timeout at `t_max`.
pub fn coupling_times(params: ModelParams, replicas: usize, t_max: u64, seed: u64) -> Vec<Option<u64>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngSpec::new(seed, replica_stream(params.n(), r)).rng();
            let mut cs = CouplingState::ordered_pair(params, 0, 1).expect("q >= 2");
            run_coupling(&mut cs, t_max, 0, &mut rng).coupling_time
        })
        .collect()
}

/// Ceiling on coupling runs, in units of `n log n`.
pub const SCALING_T_MAX_FACTOR: f64 = 200.0;

pub fn coupling_time_scaling(q: usize, beta: f64, n_list: &[usize], replicas: usize, seed: u64) -> Result<ScalingFit> {
    if n_list.is_empty() || replicas == 0 {
        return Err(Error::InvalidParameter("need at least one n and one replica".into()));
    }
    let mut warnings = Vec::new();
    if q >= 3 {
        let bs = beta_mixing(q, 1e-12)?;
        if beta >= bs {
            warnings.push(format!(
                "beta = {beta} is not below beta_s({q}) = {bs}; the n log n fit is not expected to hold"
            ));
        }
    }
    let mut means = Vec::new();
    let mut stderrs = Vec::new();
    let mut timeouts = Vec::new();
    for &n in n_list {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n = {n}: need n >= 2 for n log n")));
        }
        let params = ModelParams::new(q, n, beta)?;
        let t_max = (SCALING_T_MAX_FACTOR * n as f64 * (n as f64).ln()).ceil() as u64;
        let times = coupling_times(params, replicas, t_max, seed);
        let done: Vec<f64> = times.iter().flatten().map(|&t| t as f64).collect();
        let lost = replicas - done.len();
        if lost > 0 {
            warnings.push(format!("n = {n}: {lost} of {replicas} replicas timed out at t = {t_max}"));
        }
        let (m, se) = mean_and_stderr(&done);
        means.push(m);
        stderrs.push(se);
        timeouts.push(lost);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = n_list
        .iter()
        .zip(&means)
        .filter(|(_, m)| m.is_finite())
        .map(|(&n, &m)| (n as f64 * (n as f64).ln(), m))
        .unzip();
    let (slope_a, r_squared) = if x.is_empty() {
        (f64::NAN, 0.0)
    } else {
        fit_through_origin(&x, &y)
    };
    Ok(ScalingFit {
        q,
        beta,
        n_values: n_list.to_vec(),
        mean_coupling_times: means,
        stderrs,
        timeouts,
        replicas,
        slope_a,
        r_squared,
        warnings,
    })
}

/// Escape statistics for one system size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRow {
    pub n: usize,
    /// Mean hitting time with censored replicas counted at the cap, hence a
    /// lower bound on the true mean when `censored > 0`.
    pub mean_escape: f64,
    pub stderr: f64,
    pub censored: usize,
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeTable {
    pub q: usize,
    pub beta: f64,
    /// Target ball `|L_left - rho|_1 <= radius`.
    pub radius: f64,
    pub replicas: usize,
    pub rows: Vec<EscapeRow>,
}

/// Half the `l1` distance from `rho` to the ordered macrostate; when `beta`
/// has no ordered branch the one at `beta_c` is used.
pub fn escape_radius(q: usize, beta: f64) -> Result<f64> {
    let mut root = largest_root(beta, q, 1e-12)?;
    if !root.nontrivial {
        root = largest_root(beta_critical(q)?, q, 1e-12)?;
    }
    let nu = phi(root.s, q)?;
    Ok(0.5 * nu.l1_distance(&crate::model::ProbVector::uniform(q)))
}

/// Hitting time of `|L_left - rho|_1 <= radius` from the all-`e^1`
/// configuration, capped at `cap` steps.
pub fn escape_time(params: ModelParams, radius: f64, cap: u64, rng: &mut impl Rng) -> Option<u64> {
    let q = params.q();
    let n = params.n() as f64;
    let mut state = ChainState::ordered(params, 0).expect("valid parameters");
    let rho = n / q as f64;
    // Compare in counts to avoid re-normalizing every step.
    let threshold = radius * n + 1e-9;
    let far = |s: &ChainState| -> bool {
        let d: f64 = s.mags().left.counts().iter().map(|&c| (c as f64 - rho).abs()).sum();
        d > threshold
    };
    let mut t = 0;
    while far(&state) {
        if t >= cap {
            return None;
        }
        state.step(rng);
        t += 1;
    }
    Some(t)
}

pub fn slow_mixing_probe(
    q: usize,
    beta: f64,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
    cap: u64,
) -> Result<EscapeTable> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let radius = escape_radius(q, beta)?;
    let mut rows = Vec::new();
    for &n in n_list {
        let params = ModelParams::new(q, n, beta)?;
        let times: Vec<Option<u64>> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngSpec::new(seed, replica_stream(n, r)).rng();
                escape_time(params, radius, cap, &mut rng)
            })
            .collect();
        let censored = times.iter().filter(|t| t.is_none()).count();
        let vals: Vec<f64> = times.iter().map(|t| t.unwrap_or(cap) as f64).collect();
        let (mean_escape, stderr) = mean_and_stderr(&vals);
        rows.push(EscapeRow {
            n,
            mean_escape,
            stderr,
            censored,
            cap,
        });
    }
    Ok(EscapeTable {
        q,
        beta,
        radius,
        replicas,
        rows,
    })
}
