//! Single-site heat-bath (Glauber) dynamics on `K_{n,n}`.
//!
//! A left vertex is resampled from `g(L_n(tau))` and a right vertex from
//! `g(L_n(sigma))`, where `g` is the softmax map `z -> e^{beta z_k} / sum_j
//! e^{beta z_j}`. For the bilinear Hamiltonian these are exactly the
//! conditional Gibbs laws. One step is one vertex update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    magnetization, BipartiteConfig, MagnetizationPair, ModelParams, ProbVector, Side, SpinConfig,
};

pub type ChainRng = ChaCha8Rng;

/// Seed and replica index of a random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// ChaCha8 keyed by `seed`, on ChaCha stream `stream`.
    pub fn rng(&self) -> ChainRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// The softmax map `g(z)_k = e^{beta z_k} / sum_j e^{beta z_j}`.
pub fn g_map(z: &ProbVector, beta: f64) -> ProbVector {
    ProbVector::from_normalized(softmax_scaled(z.weights(), beta))
}

pub(crate) fn softmax_scaled(z: &[f64], beta: f64) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (beta * (v - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `J[k][j] = beta g_k (delta_kj - g_j)`, the derivative of `g_k` in `z_j`.
pub fn g_jacobian(z: &ProbVector, beta: f64) -> Vec<Vec<f64>> {
    jacobian_raw(z.weights(), beta)
}

pub(crate) fn jacobian_raw(z: &[f64], beta: f64) -> Vec<Vec<f64>> {
    let g = softmax_scaled(z, beta);
    let q = g.len();
    (0..q)
        .map(|k| {
            (0..q)
                .map(|j| beta * g[k] * (if k == j { 1.0 } else { 0.0 } - g[j]))
                .collect()
        })
        .collect()
}

/// State of one chain: configuration, incrementally maintained
/// magnetizations and the step counter.
#[derive(Clone, Debug)]
pub struct ChainState {
    params: ModelParams,
    config: BipartiteConfig,
    mags: MagnetizationPair,
    step: u64,
    /// `exp(-beta d / n)` for `d = 0..=n`.
    boltzmann: Vec<f64>,
    check_invariants: bool,
}

impl ChainState {
    pub fn new(params: ModelParams, config: BipartiteConfig) -> Result<Self> {
        if config.n() != params.n() || config.q() != params.q() {
            return Err(Error::Dimension(format!(
                "configuration (n={}, q={}) does not match parameters (n={}, q={})",
                config.n(),
                config.q(),
                params.n(),
                params.q()
            )));
        }
        let n = params.n() as f64;
        let boltzmann = (0..=params.n())
            .map(|d| (-params.beta() * d as f64 / n).exp())
            .collect();
        Ok(Self {
            params,
            mags: config.magnetizations(),
            config,
            step: 0,
            boltzmann,
            check_invariants: false,
        })
    }

    /// Every spin drawn uniformly from `0..q`.
    pub fn uniform_random(params: ModelParams, rng: &mut impl Rng) -> Result<Self> {
        let (q, n) = (params.q(), params.n());
        let mut side = || {
            let spins = (0..n).map(|_| rng.random_range(0..q) as u8).collect();
            SpinConfig::new(q, spins)
        };
        let config = BipartiteConfig::new(side()?, side()?)?;
        Self::new(params, config)
    }

    /// Both sides in state `k`.
    pub fn ordered(params: ModelParams, k: usize) -> Result<Self> {
        Self::new(params, BipartiteConfig::ordered(params.q(), params.n(), k)?)
    }

    /// Recompute magnetizations from scratch after every update and panic on
    /// a mismatch. Costs `O(n)` per step.
    pub fn set_invariant_checks(&mut self, on: bool) {
        self.check_invariants = on;
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &BipartiteConfig {
        &self.config
    }

    pub fn mags(&self) -> &MagnetizationPair {
        &self.mags
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Law of the new spin at `(side, vertex)`: `g` of the opposite side's
    /// magnetization.
    pub fn update_distribution(&self, side: Side, vertex: usize) -> Result<ProbVector> {
        if vertex >= self.params.n() {
            return Err(Error::InvalidParameter(format!(
                "vertex {vertex} out of range for n = {}",
                self.params.n()
            )));
        }
        Ok(g_map(
            &self.mags.side(side.opposite()).to_prob(),
            self.params.beta(),
        ))
    }

    /// Unnormalized update weights for a vertex on `side` written to `out`,
    /// returning their sum. Uses the precomputed Boltzmann table.
    pub(crate) fn update_weights(&self, side: Side, out: &mut [f64]) -> f64 {
        let counts = self.mags.side(side.opposite()).counts();
        let top = *counts.iter().max().expect("q >= 2");
        let mut total = 0.0;
        for (w, &c) in out.iter_mut().zip(counts) {
            *w = self.boltzmann[(top - c) as usize];
            total += *w;
        }
        total
    }

    /// Sets the spin at `(side, vertex)` to `k`, keeping counts in sync.
    pub(crate) fn set_spin(&mut self, side: Side, vertex: usize, k: usize) {
        let old = self.config.side(side).get(vertex);
        if old != k {
            self.config.side_mut(side).set(vertex, k);
            let counts = self.mags.side_mut(side).counts_mut();
            counts[old] -= 1;
            counts[k] += 1;
        }
    }

    pub(crate) fn advance_clock(&mut self) {
        self.step += 1;
        if self.check_invariants {
            self.assert_consistent();
        }
    }

    pub fn assert_consistent(&self) {
        assert_eq!(
            magnetization(self.config.left()),
            self.mags.left,
            "left magnetization drifted at step {}",
            self.step
        );
        assert_eq!(
            magnetization(self.config.right()),
            self.mags.right,
            "right magnetization drifted at step {}",
            self.step
        );
    }

    /// One heat-bath update at a uniformly chosen vertex among the `2n`.
    pub fn step(&mut self, rng: &mut impl Rng) {
        let n = self.params.n();
        let v = rng.random_range(0..2 * n);
        let (side, vertex) = if v < n {
            (Side::Left, v)
        } else {
            (Side::Right, v - n)
        };
        let mut w = [0.0; crate::model::MAX_Q];
        let q = self.params.q();
        let total = self.update_weights(side, &mut w[..q]);
        let k = sample_index(&w[..q], total, rng.random::<f64>());
        self.set_spin(side, vertex, k);
        self.advance_clock();
    }
}

/// Inverse-CDF draw from unnormalized weights.
pub(crate) fn sample_index(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    // Rounding can leave target == total; fall back to the last positive weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// One recorded point of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub mags: MagnetizationPair,
}

/// Runs `steps` updates, recording the magnetizations at step 0 and every
/// `record_every` steps after it.
pub fn run(
    state: &mut ChainState,
    steps: u64,
    record_every: u64,
    rng: &mut impl Rng,
) -> Result<Vec<TrajectoryPoint>> {
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    let mut out = Vec::with_capacity((steps / record_every + 1) as usize);
    out.push(TrajectoryPoint {
        step: state.step_count(),
        mags: state.mags().clone(),
    });
    for t in 1..=steps {
        state.step(rng);
        if t % record_every == 0 {
            out.push(TrajectoryPoint {
                step: state.step_count(),
                mags: state.mags().clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::conditional_gibbs;
    use crate::model::config_distance;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn pv(w: &[f64]) -> ProbVector {
        ProbVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn g_map_values() {
        for q in 2..6 {
            let rho = ProbVector::uniform(q);
            for beta in [0.0, 1.0, 7.0] {
                assert!(g_map(&rho, beta).l1_distance(&rho) < 1e-15);
            }
        }
        let z = pv(&[0.7, 0.2, 0.1]);
        assert_eq!(g_map(&z, 0.0), ProbVector::uniform(3));
        let g = g_map(&ProbVector::vertex(3, 0), 2.0);
        let e2 = 2f64.exp();
        let expected = [e2 / (e2 + 2.0), 1.0 / (e2 + 2.0), 1.0 / (e2 + 2.0)];
        for (a, b) in g.weights().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = g_map(&ProbVector::vertex(3, 0), 2000.0);
        assert!(g.weights().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn jacobian_values() {
        let z = pv(&[0.5, 0.3, 0.2]);
        assert!(g_jacobian(&z, 0.0).iter().flatten().all(|&v| v == 0.0));
        let beta = 1.8;
        let q = 4;
        let j = g_jacobian(&ProbVector::uniform(q), beta);
        let qf = q as f64;
        for (k, row) in j.iter().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                let expected = if k == m {
                    beta * (qf - 1.0) / (qf * qf)
                } else {
                    -beta / (qf * qf)
                };
                assert!((v - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = rng.random_range(2..6);
            let raw: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let z: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let beta = rng.random_range(0.0..5.0);
            let jac = jacobian_raw(&z, beta);
            for row in &jac {
                assert!(row.iter().sum::<f64>().abs() < 1e-14);
            }
            let h = 1e-6;
            for j in 0..q {
                let mut up = z.clone();
                let mut dn = z.clone();
                up[j] += h;
                dn[j] -= h;
                let gu = softmax_scaled(&up, beta);
                let gd = softmax_scaled(&dn, beta);
                for k in 0..q {
                    let fd = (gu[k] - gd[k]) / (2.0 * h);
                    assert!((fd - jac[k][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn update_distribution_examples() {
        let beta = 1.3;
        let p = ModelParams::new(2, 1, beta).unwrap();
        let state = ChainState::new(p, BipartiteConfig::ordered(2, 1, 0).unwrap()).unwrap();
        let d = state.update_distribution(Side::Left, 0).unwrap();
        let eb = beta.exp();
        assert!((d.weights()[0] - eb / (eb + 1.0)).abs() < 1e-15);
        let exact = conditional_gibbs(&p, state.config(), Side::Left, 0);
        assert!((d.weights()[1] - exact[1]).abs() < 1e-15);
        assert!(state.update_distribution(Side::Left, 1).is_err());

        let p0 = ModelParams::new(3, 5, 0.0).unwrap();
        let s0 = ChainState::ordered(p0, 2).unwrap();
        assert_eq!(s0.update_distribution(Side::Right, 3).unwrap(), ProbVector::uniform(3));

        // Left updates see only the right side.
        let p = ModelParams::new(3, 4, 2.0).unwrap();
        let right = SpinConfig::constant(3, 4, 0).unwrap();
        let a = BipartiteConfig::new(SpinConfig::new(3, vec![0, 1, 2, 2]).unwrap(), right.clone())
            .unwrap();
        let b = BipartiteConfig::new(SpinConfig::new(3, vec![1, 1, 1, 0]).unwrap(), right).unwrap();
        let sa = ChainState::new(p, a).unwrap();
        let sb = ChainState::new(p, b).unwrap();
        assert_eq!(
            sa.update_distribution(Side::Left, 0).unwrap(),
            sb.update_distribution(Side::Left, 2).unwrap()
        );
    }

    #[test]
    fn table_weights_match_g_map() {
        let p = ModelParams::new(4, 9, 3.3).unwrap();
        let mut rng = RngSpec::new(1, 0).rng();
        let mut s = ChainState::uniform_random(p, &mut rng).unwrap();
        for _ in 0..200 {
            s.step(&mut rng);
            for side in [Side::Left, Side::Right] {
                let mut w = [0.0; 4];
                let total = s.update_weights(side, &mut w);
                let g = s.update_distribution(side, 0).unwrap();
                for (a, b) in w.iter().zip(g.weights()) {
                    assert!((a / total - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn step_marginal_matches_update_distribution() {
        let p = ModelParams::new(3, 6, 1.7).unwrap();
        let cfg = BipartiteConfig::new(
            SpinConfig::new(3, vec![0, 0, 1, 2, 2, 2]).unwrap(),
            SpinConfig::new(3, vec![0, 0, 0, 0, 1, 2]).unwrap(),
        )
        .unwrap();
        let base = ChainState::new(p, cfg).unwrap();
        let mut rng = RngSpec::new(99, 0).rng();
        let mut hist = [[0u64; 3]; 2];
        let reps = 100_000;
        for _ in 0..reps {
            let mut s = base.clone();
            // Replay the vertex draw to learn which site the step picks.
            let v = rng.clone().random_range(0..12);
            s.step(&mut rng);
            assert!(config_distance(base.config(), s.config()).unwrap() <= 1);
            let (side, idx) = if v < 6 { (0, v) } else { (1, v - 6) };
            let spin = if side == 0 {
                s.config().left().get(idx)
            } else {
                s.config().right().get(idx)
            };
            hist[side][spin] += 1;
        }
        for (side, h) in [Side::Left, Side::Right].into_iter().zip(hist) {
            let expected = base.update_distribution(side, 0).unwrap();
            let total: u64 = h.iter().sum();
            let chi2: f64 = h
                .iter()
                .zip(expected.weights())
                .map(|(&o, &p)| {
                    let e = p * total as f64;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            let pvalue = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
            assert!(pvalue > 0.001, "{side:?}: chi2 = {chi2}");
        }
    }

    #[test]
    fn run_records_and_is_deterministic() {
        let p = ModelParams::new(3, 8, 1.0).unwrap();
        let start = ChainState::ordered(p, 0).unwrap();
        let mut s = start.clone();
        let traj = run(&mut s, 0, 5, &mut RngSpec::new(4, 1).rng()).unwrap();
        assert_eq!(traj.len(), 1);
        let go = || {
            let mut s = start.clone();
            run(&mut s, 1003, 10, &mut RngSpec::new(4, 1).rng()).unwrap()
        };
        let a = go();
        assert_eq!(a.len(), 1003 / 10 + 1);
        assert_eq!(a, go());
        let mut other = start.clone();
        let b = run(&mut other, 1003, 10, &mut RngSpec::new(4, 2).rng()).unwrap();
        assert_ne!(a, b);
        assert!(run(&mut start.clone(), 10, 0, &mut RngSpec::new(0, 0).rng()).is_err());
    }

    #[test]
    fn incremental_magnetization_stays_exact() {
        let p = ModelParams::new(5, 40, 2.2).unwrap();
        let mut rng = RngSpec::new(11, 0).rng();
        let mut s = ChainState::uniform_random(p, &mut rng).unwrap();
        s.set_invariant_checks(true);
        for _ in 0..100_000 {
            s.step(&mut rng);
        }
        s.assert_consistent();
        assert_eq!(s.step_count(), 100_000);
    }
}
