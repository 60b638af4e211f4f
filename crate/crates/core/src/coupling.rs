//! Greedy coupling of two Glauber chains: both chains update the same
//! vertex and the new spins are matched with maximal probability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glauber::{jacobian_raw, sample_index, softmax_scaled, ChainState};
use crate::model::{config_distance, BipartiteConfig, ModelParams, ProbVector, Side, MAX_Q};

/// Joint law of the new spin pair `(k, m)` at a shared vertex, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLaw {
    q: usize,
    probs: Vec<f64>,
}

impl JointLaw {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.probs[k * self.q + m]
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        (0..self.q).map(|k| (0..self.q).map(|m| self.get(k, m)).sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        (0..self.q).map(|m| (0..self.q).map(|k| self.get(k, m)).sum()).collect()
    }

    /// `P(k != m)`.
    pub fn mismatch(&self) -> f64 {
        1.0 - (0..self.q).map(|k| self.get(k, k)).sum::<f64>()
    }
}

/// Maximal coupling of `px` and `py`: `min(px_k, py_k)` on the diagonal and
/// independent residuals off it. Identical laws give the identity coupling.
pub fn coupled_update_dist(px: &ProbVector, py: &ProbVector) -> Result<JointLaw> {
    if px.len() != py.len() {
        return Err(Error::Dimension(format!(
            "update laws of length {} and {}",
            px.len(),
            py.len()
        )));
    }
    Ok(joint_from_weights(px.weights(), py.weights()))
}

fn joint_from_weights(px: &[f64], py: &[f64]) -> JointLaw {
    let q = px.len();
    let mins: Vec<f64> = px.iter().zip(py).map(|(a, b)| a.min(*b)).collect();
    let mut probs = vec![0.0; q * q];
    for k in 0..q {
        probs[k * q + k] = mins[k];
    }
    let rx: Vec<f64> = px.iter().zip(&mins).map(|(a, m)| a - m).collect();
    let ry: Vec<f64> = py.iter().zip(&mins).map(|(a, m)| a - m).collect();
    // Residual masses; equal to 1 - sum(mins) in exact arithmetic.
    let residual: f64 = rx.iter().sum();
    if residual > 0.0 {
        for k in 0..q {
            for m in 0..q {
                if k != m {
                    probs[k * q + m] += rx[k] * ry[m] / residual;
                }
            }
        }
    }
    JointLaw { q, probs }
}

/// Two chains with the same parameters evolved under the greedy coupling.
#[derive(Clone, Debug)]
pub struct CouplingState {
    x: ChainState,
    y: ChainState,
    distance: usize,
    coalesced_at: Option<u64>,
}

impl CouplingState {
    pub fn new(params: ModelParams, x: BipartiteConfig, y: BipartiteConfig) -> Result<Self> {
        let x = ChainState::new(params, x)?;
        let y = ChainState::new(params, y)?;
        let distance = config_distance(x.config(), y.config())?;
        Ok(Self {
            x,
            y,
            distance,
            coalesced_at: (distance == 0).then_some(0),
        })
    }

    /// Left and right all in `kx` versus all in `ky`.
    pub fn ordered_pair(params: ModelParams, kx: usize, ky: usize) -> Result<Self> {
        let (q, n) = (params.q(), params.n());
        Self::new(
            params,
            BipartiteConfig::ordered(q, n, kx)?,
            BipartiteConfig::ordered(q, n, ky)?,
        )
    }

    pub fn x(&self) -> &ChainState {
        &self.x
    }

    pub fn y(&self) -> &ChainState {
        &self.y
    }

    pub fn params(&self) -> &ModelParams {
        self.x.params()
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn coalesced_at(&self) -> Option<u64> {
        self.coalesced_at
    }

    pub fn step_count(&self) -> u64 {
        self.x.step_count()
    }

    /// One coupled update at a shared uniformly chosen vertex.
    pub fn step(&mut self, rng: &mut impl Rng) {
        let params = *self.x.params();
        let (q, n) = (params.q(), params.n());
        let v = rng.random_range(0..2 * n);
        let (side, vertex) = if v < n {
            (Side::Left, v)
        } else {
            (Side::Right, v - n)
        };
        let mut wx = [0.0; MAX_Q];
        let mut wy = [0.0; MAX_Q];
        let tx = self.x.update_weights(side, &mut wx[..q]);
        let same_law =
            self.x.mags().side(side.opposite()) == self.y.mags().side(side.opposite());
        let (kx, ky) = if same_law {
            let k = sample_index(&wx[..q], tx, rng.random::<f64>());
            (k, k)
        } else {
            let ty = self.y.update_weights(side, &mut wy[..q]);
            let mut mins = [0.0; MAX_Q];
            let mut diag = 0.0;
            for k in 0..q {
                wx[k] /= tx;
                wy[k] /= ty;
                mins[k] = wx[k].min(wy[k]);
                diag += mins[k];
            }
            let u = rng.random::<f64>();
            if u < diag {
                let k = sample_index(&mins[..q], diag, u / diag);
                (k, k)
            } else {
                for k in 0..q {
                    wx[k] -= mins[k];
                    wy[k] -= mins[k];
                }
                let rx: f64 = wx[..q].iter().sum();
                let ry: f64 = wy[..q].iter().sum();
                if rx > 0.0 && ry > 0.0 {
                    let kx = sample_index(&wx[..q], rx, rng.random::<f64>());
                    let ky = sample_index(&wy[..q], ry, rng.random::<f64>());
                    (kx, ky)
                } else {
                    // Rounding put u in an empty residual; the diagonal is the whole law.
                    let k = sample_index(&mins[..q], diag, rng.random::<f64>());
                    (k, k)
                }
            }
        };
        let matched_before =
            self.x.config().side(side).get(vertex) == self.y.config().side(side).get(vertex);
        self.x.set_spin(side, vertex, kx);
        self.y.set_spin(side, vertex, ky);
        self.x.advance_clock();
        self.y.advance_clock();
        match (matched_before, kx == ky) {
            (true, false) => self.distance += 1,
            (false, true) => self.distance -= 1,
            _ => {}
        }
        if self.distance == 0 && self.coalesced_at.is_none() {
            self.coalesced_at = Some(self.x.step_count());
        }
    }
}

fn side_laws(cs: &CouplingState, side: Side) -> (Vec<f64>, Vec<f64>) {
    let beta = cs.params().beta();
    let zx = cs.x.mags().side(side.opposite()).proportions();
    let zy = cs.y.mags().side(side.opposite()).proportions();
    (softmax_scaled(&zx, beta), softmax_scaled(&zy, beta))
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Mismatch probabilities at a freshly updated vertex on each side,
/// `(TV(g(L(tau)), g(L(tau'))), TV(g(L(sigma)), g(L(sigma'))))`.
pub fn kappa_sides(cs: &CouplingState) -> (f64, f64) {
    let (lx, ly) = side_laws(cs, Side::Left);
    let (rx, ry) = side_laws(cs, Side::Right);
    (tv(&lx, &ly), tv(&rx, &ry))
}

/// Probability that the coupled chains update differently, summed over sides.
pub fn kappa(cs: &CouplingState) -> f64 {
    let (l, r) = kappa_sides(cs);
    l + r
}

/// First-order version of [`kappa_sides`]: `(1/2) sum_k |<grad g_k(z), dz>|`
/// with `z` the opposite side's magnetization in the first chain.
pub fn kappa_linear(cs: &CouplingState) -> (f64, f64) {
    let beta = cs.params().beta();
    let one = |side: Side| {
        let zx = cs.x.mags().side(side.opposite()).proportions();
        let zy = cs.y.mags().side(side.opposite()).proportions();
        let dz: Vec<f64> = zy.iter().zip(&zx).map(|(a, b)| a - b).collect();
        let jac = jacobian_raw(&zx, beta);
        0.5 * jac
            .iter()
            .map(|row| row.iter().zip(&dz).map(|(a, b)| a * b).sum::<f64>().abs())
            .sum::<f64>()
    };
    (one(Side::Left), one(Side::Right))
}

/// Exact `E[d(X_1, Y_1)]`, enumerating the `2n` vertex choices and the
/// joint spin law at each.
pub fn one_step_expected_distance(cs: &CouplingState) -> f64 {
    let n = cs.params().n();
    let mut total = 0.0;
    for side in [Side::Left, Side::Right] {
        let (px, py) = side_laws(cs, side);
        let mismatch = if cs.x.mags().side(side.opposite()) == cs.y.mags().side(side.opposite()) {
            0.0
        } else {
            joint_from_weights(&px, &py).mismatch()
        };
        let sx = cs.x.config().side(side);
        let sy = cs.y.config().side(side);
        for v in 0..n {
            let here = usize::from(sx.get(v) != sy.get(v));
            total += (cs.distance as f64 - here as f64 + mismatch) / (2 * n) as f64;
        }
    }
    total
}

/// `(E[d_1] - (1 - 1/(2n)) d - (kappa_left + kappa_right)/2) / |dmag|_1^2`,
/// the slack constant needed by the linearized one-step bound at this pair.
/// `None` when the magnetizations agree (the bound is then exact).
pub fn one_step_slack(cs: &CouplingState) -> Option<f64> {
    let n = cs.params().n() as f64;
    let d = cs.distance as f64;
    let (kl, kr) = kappa_linear(cs);
    let excess = one_step_expected_distance(cs) - (1.0 - 1.0 / (2.0 * n)) * d - 0.5 * (kl + kr);
    let dm = cs.x.mags().l1_distance(cs.y.mags());
    if dm == 0.0 {
        return None;
    }
    Some(excess / (dm * dm))
}

/// Distance recorded at one step of a coupled run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub step: u64,
    pub distance: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    /// First step at which the chains coincide, `None` on timeout.
    pub coupling_time: Option<u64>,
    pub steps_run: u64,
    pub trace: Vec<DistancePoint>,
}

impl CouplingRun {
    pub fn timed_out(&self) -> bool {
        self.coupling_time.is_none()
    }
}

/// Runs the coupling until coalescence or `t_max` steps. With `stride > 0`
/// the distance is recorded every `stride` steps and at the final step.
pub fn run_coupling(
    cs: &mut CouplingState,
    t_max: u64,
    stride: u64,
    rng: &mut impl Rng,
) -> CouplingRun {
    let start = cs.step_count();
    let mut trace = Vec::new();
    let record = |cs: &CouplingState, trace: &mut Vec<DistancePoint>| {
        trace.push(DistancePoint {
            step: cs.step_count() - start,
            distance: cs.distance(),
        })
    };
    if stride > 0 {
        record(cs, &mut trace);
    }
    let mut t = 0;
    while cs.distance() > 0 && t < t_max {
        cs.step(rng);
        t += 1;
        if stride > 0 && (t % stride == 0 || cs.distance() == 0) {
            record(cs, &mut trace);
        }
    }
    CouplingRun {
        coupling_time: (cs.distance() == 0).then_some(t),
        steps_run: t,
        trace,
    }
}

/// All one-step transitions of the coupled pair `(x, y)`: next pair and
/// probability. Marginalizing out either coordinate gives that chain's
/// Glauber kernel row.
pub fn coupled_transitions(
    params: &ModelParams,
    x: &BipartiteConfig,
    y: &BipartiteConfig,
) -> Result<Vec<(BipartiteConfig, BipartiteConfig, f64)>> {
    let cs = CouplingState::new(*params, x.clone(), y.clone())?;
    let (q, n) = (params.q(), params.n());
    let mut out = Vec::new();
    for side in [Side::Left, Side::Right] {
        let (px, py) = side_laws(&cs, side);
        let joint = if cs.x.mags().side(side.opposite()) == cs.y.mags().side(side.opposite()) {
            let mut probs = vec![0.0; q * q];
            for k in 0..q {
                probs[k * q + k] = px[k];
            }
            JointLaw { q, probs }
        } else {
            joint_from_weights(&px, &py)
        };
        for v in 0..n {
            for k in 0..q {
                for m in 0..q {
                    let p = joint.get(k, m);
                    if p == 0.0 {
                        continue;
                    }
                    let mut a = cs.x.clone();
                    let mut b = cs.y.clone();
                    a.set_spin(side, v, k);
                    b.set_spin(side, v, m);
                    out.push((a.config().clone(), b.config().clone(), p / (2 * n) as f64));
                }
            }
        }
    }
    Ok(out)
}

/// Smallest slack constant making the linearized one-step bound hold on a
/// sample of random configuration pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackSurvey {
    pub q: usize,
    pub n_values: Vec<usize>,
    pub betas: Vec<f64>,
    pub pairs: usize,
    /// `max` over pairs of [`one_step_slack`]; `<= 0` means no slack needed.
    pub c_star: f64,
    /// Largest `E[d_1] - (1 - 1/(2n)) d - kappa / 2` with the exact `kappa`;
    /// zero up to rounding, since that form is an identity.
    pub exact_form_excess: f64,
}

/// Samples `pairs_per_cell` uniformly random configuration pairs for every
/// `(n, beta)` and reports the smallest admissible slack constant.
pub fn one_step_slack_survey(
    q: usize,
    n_values: &[usize],
    betas: &[f64],
    pairs_per_cell: usize,
    seed: u64,
) -> Result<SlackSurvey> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c_star = f64::NEG_INFINITY;
    let mut exact_form_excess: f64 = 0.0;
    let mut pairs = 0;
    for &n in n_values {
        for &beta in betas {
            let params = ModelParams::new(q, n, beta)?;
            for _ in 0..pairs_per_cell {
                let mut draw = || {
                    let mut side = || {
                        crate::model::SpinConfig::new(q, (0..n).map(|_| rng.random_range(0..q) as u8).collect())
                    };
                    BipartiteConfig::new(side()?, side()?)
                };
                let cs = CouplingState::new(params, draw()?, draw()?)?;
                let d = cs.distance() as f64;
                let e = one_step_expected_distance(&cs);
                let exact = e - (1.0 - 1.0 / (2.0 * n as f64)) * d - 0.5 * kappa(&cs);
                exact_form_excess = exact_form_excess.max(exact.abs());
                if let Some(c) = one_step_slack(&cs) {
                    c_star = c_star.max(c);
                }
                pairs += 1;
            }
        }
    }
    Ok(SlackSurvey {
        q,
        n_values: n_values.to_vec(),
        betas: betas.to_vec(),
        pairs,
        c_star,
        exact_form_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{config_from_index, exact_glauber_kernel, index_of, state_count};
    use crate::glauber::RngSpec;
    use crate::model::SpinConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pv(w: &[f64]) -> ProbVector {
        ProbVector::new(w.to_vec()).unwrap()
    }

    fn random_config(q: usize, n: usize, rng: &mut impl Rng) -> BipartiteConfig {
        let mut side = || SpinConfig::new(q, (0..n).map(|_| rng.random_range(0..q) as u8).collect()).unwrap();
        BipartiteConfig::new(side(), side()).unwrap()
    }

    #[test]
    fn joint_law_examples() {
        let j = coupled_update_dist(&pv(&[0.6, 0.4]), &pv(&[0.4, 0.6])).unwrap();
        assert!((j.get(0, 0) - 0.4).abs() < 1e-15);
        assert!((j.get(1, 1) - 0.4).abs() < 1e-15);
        assert!((j.get(0, 1) - 0.2).abs() < 1e-15);
        assert_eq!(j.get(1, 0), 0.0);
        let same = coupled_update_dist(&pv(&[0.2, 0.3, 0.5]), &pv(&[0.2, 0.3, 0.5])).unwrap();
        assert_eq!(same.mismatch(), 0.0);
        assert_eq!(same.get(2, 2), 0.5);
        let disjoint = coupled_update_dist(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap();
        assert_eq!(disjoint.get(0, 1), 1.0);
        assert_eq!(disjoint.mismatch(), 1.0);
        assert!(coupled_update_dist(&pv(&[1.0, 0.0]), &pv(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn joint_law_marginals_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let q = rng.random_range(2..7);
            let mut draw = || {
                let w: Vec<f64> = (0..q).map(|_| rng.random::<f64>() + 1e-3).collect();
                let t: f64 = w.iter().sum();
                pv(&w.iter().map(|x| x / t).collect::<Vec<_>>())
            };
            let (a, b) = (draw(), draw());
            let j = coupled_update_dist(&a, &b).unwrap();
            for (m, w) in j.first_marginal().iter().zip(a.weights()) {
                assert!((m - w).abs() < 1e-14);
            }
            for (m, w) in j.second_marginal().iter().zip(b.weights()) {
                assert!((m - w).abs() < 1e-14);
            }
            assert!((j.mismatch() - 0.5 * a.l1_distance(&b)).abs() < 1e-14);
        }
    }

    #[test]
    fn single_discrepancy_at_zero_beta() {
        let p = ModelParams::new(2, 1, 0.0).unwrap();
        let x = BipartiteConfig::new(SpinConfig::new(2, vec![0]).unwrap(), SpinConfig::new(2, vec![0]).unwrap()).unwrap();
        let y = BipartiteConfig::new(SpinConfig::new(2, vec![1]).unwrap(), SpinConfig::new(2, vec![0]).unwrap()).unwrap();
        let cs = CouplingState::new(p, x, y).unwrap();
        assert_eq!(cs.distance(), 1);
        // Equal update laws are coupled by the identity, so a selected
        // discrepant site always matches: E = (1 - 1/(2n)) d. Independent
        // uniform updates would give 3/4 instead.
        assert!((one_step_expected_distance(&cs) - 0.5).abs() < 1e-15);
        assert_eq!(kappa(&cs), 0.0);
        // q = 3: a selected site matches only through the diagonal, always at beta = 0.
        let p = ModelParams::new(3, 5, 0.0).unwrap();
        let mut y = BipartiteConfig::ordered(3, 5, 0).unwrap();
        y.side_mut(Side::Right).set(2, 1);
        let cs = CouplingState::new(p, BipartiteConfig::ordered(3, 5, 0).unwrap(), y).unwrap();
        assert!((one_step_expected_distance(&cs) - (1.0 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn marginals_of_coupled_kernel_match_exact_kernel() {
        let p = ModelParams::new(3, 2, 1.3).unwrap();
        let k = exact_glauber_kernel(&p).unwrap();
        let states = state_count(&p) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for xi in 0..states {
            let yi = rng.random_range(0..states);
            let (x, y) = (config_from_index(&p, xi), config_from_index(&p, yi));
            let mut mx = vec![0.0; states];
            let mut my = vec![0.0; states];
            for (a, b, pr) in coupled_transitions(&p, &x, &y).unwrap() {
                mx[index_of(&a)] += pr;
                my[index_of(&b)] += pr;
            }
            for j in 0..states {
                worst = worst.max((mx[j] - k.get(xi, j)).abs());
                worst = worst.max((my[j] - k.get(yi, j)).abs());
            }
        }
        assert!(worst < 1e-13, "worst = {worst:e}");
    }

    #[test]
    fn distance_is_tracked_and_absorbing() {
        let p = ModelParams::new(3, 8, 1.0).unwrap();
        let mut rng = RngSpec::new(1, 2).rng();
        let mut cs = CouplingState::ordered_pair(p, 0, 1).unwrap();
        cs.x.set_invariant_checks(true);
        let run = run_coupling(&mut cs, 1_000_000, 1, &mut rng);
        let tc = run.coupling_time.expect("couples quickly at n = 8");
        for w in run.trace.windows(2) {
            assert!(w[1].distance.abs_diff(w[0].distance) <= 1);
        }
        for _ in 0..2000 {
            cs.step(&mut rng);
            assert_eq!(config_distance(cs.x.config(), cs.y.config()).unwrap(), 0);
        }
        assert_eq!(cs.distance(), 0);
        assert_eq!(cs.coalesced_at(), Some(tc));
    }

    #[test]
    fn incremental_distance_matches_recount() {
        let p = ModelParams::new(4, 12, 2.0).unwrap();
        let mut rng = RngSpec::new(5, 0).rng();
        let mut cs = CouplingState::new(p, random_config(4, 12, &mut rng), random_config(4, 12, &mut rng)).unwrap();
        for _ in 0..20_000 {
            let before = cs.distance();
            cs.step(&mut rng);
            assert!(cs.distance().abs_diff(before) <= 1);
            assert_eq!(cs.distance(), config_distance(cs.x.config(), cs.y.config()).unwrap());
        }
    }

    #[test]
    fn equal_starts_couple_at_zero() {
        let p = ModelParams::new(3, 4, 1.0).unwrap();
        let mut cs = CouplingState::ordered_pair(p, 2, 2).unwrap();
        let run = run_coupling(&mut cs, 10, 1, &mut RngSpec::new(0, 0).rng());
        assert_eq!(run.coupling_time, Some(0));
        assert_eq!(run.trace.len(), 1);
    }

    #[test]
    fn kappa_matches_vertex_enumeration() {
        let p = ModelParams::new(3, 10, 1.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let cs = CouplingState::new(p, random_config(3, 10, &mut rng), random_config(3, 10, &mut rng)).unwrap();
            // Expected post-update mismatch at a uniform vertex, summed over the two sides.
            let mut per_vertex = 0.0;
            for side in [Side::Left, Side::Right] {
                for v in 0..10 {
                    let a = cs.x.update_distribution(side, v).unwrap();
                    let b = cs.y.update_distribution(side, v).unwrap();
                    per_vertex += coupled_update_dist(&a, &b).unwrap().mismatch() / 10.0;
                }
            }
            assert!((kappa(&cs) - per_vertex).abs() < 1e-14);
        }
        let same = CouplingState::ordered_pair(p, 1, 1).unwrap();
        assert_eq!(kappa(&same), 0.0);
    }

    #[test]
    fn one_step_bound_with_small_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst = f64::NEG_INFINITY;
        for &n in &[20, 50] {
            for &beta in &[0.5, 1.5] {
                let p = ModelParams::new(3, n, beta).unwrap();
                for _ in 0..300 {
                    let cs = CouplingState::new(p, random_config(3, n, &mut rng), random_config(3, n, &mut rng)).unwrap();
                    if let Some(c) = one_step_slack(&cs) {
                        worst = worst.max(c);
                    }
                }
            }
        }
        assert!(worst <= 0.05, "slack constant {worst}");
    }

    #[test]
    fn empirical_mismatch_rate_matches_kappa() {
        // Resample from the same coupled state: the first step's distance change
        // has the law implied by the enumeration.
        let p = ModelParams::new(3, 6, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cs = CouplingState::new(p, random_config(3, 6, &mut rng), random_config(3, 6, &mut rng)).unwrap();
        let exact = one_step_expected_distance(&cs);
        let reps = 200_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut r = RngSpec::new(11, 0).rng();
        for _ in 0..reps {
            let mut c = cs.clone();
            c.step(&mut r);
            let d = c.distance() as f64;
            sum += d;
            sq += d * d;
        }
        let mean = sum / reps as f64;
        let se = ((sq / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - exact).abs() < 5.0 * se, "mean {mean} exact {exact} se {se}");
    }
}
