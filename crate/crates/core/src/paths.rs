//! Aggregate path coupling diagnostics: monotone paths between
//! configurations, the discrete aggregate variation `S1 + S2` along them,
//! the continuous aggregate `g`-variation along straight lines, and the
//! contraction checks built from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glauber::softmax_scaled;
use crate::model::{config_distance, BipartiteConfig, ProbVector, Side};

/// Sites flipped together; `net` is `Some((from, to))` for a unit that moves
/// one unit of count from `from` to `to`, `None` for a cycle.
#[derive(Clone, Debug)]
struct Unit {
    side: Side,
    flips: Vec<(usize, u8)>,
    net: Option<(usize, usize)>,
}

/// A path of configurations along which every coordinate of both
/// magnetizations moves monotonically and the distances of the links add up
/// to the distance between the endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonePath {
    pub waypoints: Vec<BipartiteConfig>,
    pub epsilon: f64,
    /// Count-moving units per full link.
    pub units_per_link: usize,
}

impl MonotonePath {
    pub fn links(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// Magnetization-pair `l1` increment of every link.
    pub fn increments(&self) -> Vec<f64> {
        self.waypoints
            .windows(2)
            .map(|w| w[0].magnetizations().l1_distance(&w[1].magnetizations()))
            .collect()
    }

    pub fn audit(&self) -> Result<PathAudit> {
        let first = &self.waypoints[0];
        let last = self.waypoints.last().expect("nonempty");
        let endpoint_distance = config_distance(first, last)?;
        let mut link_sum = 0;
        for w in self.waypoints.windows(2) {
            link_sum += config_distance(&w[0], &w[1])?;
        }
        let mut monotone = true;
        for side in [Side::Left, Side::Right] {
            let series: Vec<Vec<u32>> = self
                .waypoints
                .iter()
                .map(|c| c.magnetizations().side(side).counts().to_vec())
                .collect();
            for k in 0..first.q() {
                let up = series.windows(2).all(|w| w[1][k] >= w[0][k]);
                let down = series.windows(2).all(|w| w[1][k] <= w[0][k]);
                monotone &= up || down;
            }
        }
        let inc = self.increments();
        let (body, tail) = match inc.split_last() {
            Some((t, b)) => (b, Some(*t)),
            None => (&inc[..], None),
        };
        let tol = 1e-12;
        let in_window = |x: f64| x >= self.epsilon - tol && x < 2.0 * self.epsilon - tol;
        let spacing = body.iter().all(|&x| in_window(x))
            && tail.map_or(true, |t| in_window(t) || t < self.epsilon + tol);
        Ok(PathAudit {
            endpoint_distance,
            link_distance_sum: link_sum,
            additive: endpoint_distance == link_sum,
            monotone,
            spacing,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathAudit {
    pub endpoint_distance: usize,
    pub link_distance_sum: usize,
    pub additive: bool,
    pub monotone: bool,
    /// Every link but the last has increment in `[eps, 2 eps)`; the last is
    /// either in that window or shorter.
    pub spacing: bool,
}

impl PathAudit {
    pub fn passed(&self) -> bool {
        self.additive && self.monotone && self.spacing
    }
}

/// Splits the flips taking `a` to `b` on one side into count-moving chains
/// and count-neutral cycles. Each differing site is flipped once, directly
/// to its target spin.
fn decompose_side(a: &BipartiteConfig, b: &BipartiteConfig, side: Side) -> (Vec<Unit>, Vec<Unit>) {
    let q = a.q();
    let (sa, sb) = (a.side(side), b.side(side));
    // edges[u][w]: sites with spin u in `a` and w in `b`.
    let mut edges: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); q]; q];
    for i in 0..sa.len() {
        let (u, w) = (sa.get(i), sb.get(i));
        if u != w {
            edges[u][w].push(i);
        }
    }
    let ca = a.magnetizations().side(side).counts().to_vec();
    let cb = b.magnetizations().side(side).counts().to_vec();
    // Remaining surplus of each spin value over its target count.
    let mut surplus: Vec<i64> = ca.iter().zip(&cb).map(|(&x, &y)| x as i64 - y as i64).collect();
    let next_edge = |edges: &mut Vec<Vec<Vec<usize>>>, u: usize| -> Option<(usize, usize)> {
        (0..q).find_map(|w| edges[u][w].pop().map(|site| (w, site)))
    };

    let mut chains = Vec::new();
    while let Some(s) = (0..q).find(|&k| surplus[k] > 0) {
        let mut flips = Vec::new();
        let mut v = s;
        loop {
            let (w, site) = next_edge(&mut edges, v).expect("balanced flip graph");
            flips.push((site, w as u8));
            v = w;
            if surplus[v] < 0 {
                break;
            }
        }
        surplus[s] -= 1;
        surplus[v] += 1;
        chains.push(Unit {
            side,
            flips,
            net: Some((s, v)),
        });
    }
    let mut cycles = Vec::new();
    while let Some(s) = (0..q).find(|&u| edges[u].iter().any(|e| !e.is_empty())) {
        let mut flips = Vec::new();
        let mut v = s;
        loop {
            let (w, site) = next_edge(&mut edges, v).expect("balanced flip graph");
            flips.push((site, w as u8));
            v = w;
            if v == s {
                break;
            }
        }
        cycles.push(Unit {
            side,
            flips,
            net: None,
        });
    }
    (order_along_line(chains, &ca, &cb), cycles)
}

/// Orders count-moving units so the counts track the straight line from
/// `ca` to `cb` as closely as possible.
fn order_along_line(mut units: Vec<Unit>, ca: &[u32], cb: &[u32]) -> Vec<Unit> {
    let total = units.len();
    let mut cur: Vec<f64> = ca.iter().map(|&c| c as f64).collect();
    let mut out = Vec::with_capacity(total);
    for i in 1..=total {
        let f = i as f64 / total as f64;
        let target: Vec<f64> = ca
            .iter()
            .zip(cb)
            .map(|(&x, &y)| x as f64 + f * (y as f64 - x as f64))
            .collect();
        let mut best = (f64::INFINITY, 0);
        let mut seen = Vec::new();
        for (idx, u) in units.iter().enumerate() {
            let (s, w) = u.net.expect("count-moving unit");
            if seen.contains(&(s, w)) {
                continue;
            }
            seen.push((s, w));
            let err: f64 = (0..cur.len())
                .map(|k| {
                    let mut c = cur[k];
                    if k == s {
                        c -= 1.0;
                    }
                    if k == w {
                        c += 1.0;
                    }
                    (c - target[k]).powi(2)
                })
                .sum();
            if err < best.0 {
                best = (err, idx);
            }
        }
        let u = units.remove(best.1);
        let (s, w) = u.net.expect("count-moving unit");
        cur[s] -= 1.0;
        cur[w] += 1.0;
        out.push(u);
    }
    out
}

/// Interleaves two sides' units in blocks of `j` so that both sides advance
/// proportionally at the scale of a link. Each full link then moves a single
/// side by `j` units; leftover partial blocks go last.
fn interleave(mut left: Vec<Unit>, mut right: Vec<Unit>, j: usize) -> Vec<Unit> {
    let tail_l = left.split_off(left.len() - left.len() % j);
    let tail_r = right.split_off(right.len() - right.len() % j);
    let (nl, nr) = (left.len() / j, right.len() / j);
    let mut out = Vec::with_capacity(left.len() + right.len() + tail_l.len() + tail_r.len());
    let (mut l, mut r) = (left.into_iter(), right.into_iter());
    let (mut i, mut k) = (0usize, 0usize);
    while i < nl || k < nr {
        // Compare (i+1)/nl with (k+1)/nr without division.
        let take_left = k == nr || (i < nl && (i + 1) * nr <= (k + 1) * nl);
        if take_left {
            out.extend(l.by_ref().take(j));
            i += 1;
        } else {
            out.extend(r.by_ref().take(j));
            k += 1;
        }
    }
    out.extend(tail_l);
    out.extend(tail_r);
    out
}

/// Monotone path from `a` to `b` whose links each move the magnetization
/// pair by `2j/n` in `l1` for `j = ceil(eps n / 2)`, so `2j/n` lies in
/// `[eps, 2 eps)`. A final link may be shorter. Count-neutral cycles ride
/// along in the first link.
pub fn build_monotone_path(a: &BipartiteConfig, b: &BipartiteConfig, epsilon: f64) -> Result<MonotonePath> {
    if a.q() != b.q() || a.n() != b.n() {
        return Err(Error::Dimension(format!(
            "endpoints differ in shape: (q={}, n={}) vs (q={}, n={})",
            a.q(),
            a.n(),
            b.q(),
            b.n()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside (0, 2)")));
    }
    let n = a.n() as f64;
    let j = (epsilon * n / 2.0).ceil() as usize;
    if j < 1 || 2.0 * j as f64 / n >= 2.0 * epsilon {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} too small for n = {}: no link size 2j/n lies in [eps, 2 eps)",
            a.n()
        )));
    }
    let (lc, lz) = decompose_side(a, b, Side::Left);
    let (rc, rz) = decompose_side(a, b, Side::Right);
    let chains = interleave(lc, rc, j);

    let mut waypoints = vec![a.clone()];
    let mut cur = a.clone();
    let apply = |cur: &mut BipartiteConfig, u: &Unit| {
        for &(site, k) in &u.flips {
            cur.side_mut(u.side).set(site, k as usize);
        }
    };
    let cycles: Vec<Unit> = lz.into_iter().chain(rz).collect();
    for u in &cycles {
        apply(&mut cur, u);
    }
    if chains.is_empty() {
        if !cycles.is_empty() {
            waypoints.push(cur);
        }
    } else {
        for link in chains.chunks(j) {
            for u in link {
                apply(&mut cur, u);
            }
            waypoints.push(cur.clone());
        }
    }
    Ok(MonotonePath {
        waypoints,
        epsilon,
        units_per_link: j,
    })
}

/// `<grad g_k(z), v>` for all `k`: `beta g_k (v_k - <g, v>)`.
fn directional(z: &[f64], v: &[f64], beta: f64) -> Vec<f64> {
    let g = softmax_scaled(z, beta);
    let gv: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
    g.iter().zip(v).map(|(gk, vk)| beta * gk * (vk - gv)).collect()
}

fn abs_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `(S1, S2)`: for each side, `sum_i sum_k |<L(x_i) - L(x_{i-1}), grad g_k(L(x_{i-1}))>|`.
pub fn discrete_aggregate_variation(path: &MonotonePath, beta: f64) -> (f64, f64) {
    let one = |side: Side| {
        path.waypoints
            .windows(2)
            .map(|w| {
                let z0 = w[0].magnetizations().side(side).proportions();
                let z1 = w[1].magnetizations().side(side).proportions();
                let dz: Vec<f64> = z1.iter().zip(&z0).map(|(a, b)| a - b).collect();
                abs_sum(&directional(&z0, &dz, beta))
            })
            .sum()
    };
    (one(Side::Left), one(Side::Right))
}

const MAX_DEPTH: u32 = 40;

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

fn adaptive(
    f: &impl Fn(f64) -> f64,
    (a, fa): (f64, f64),
    (b, fb): (f64, f64),
    (m, fm): (f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence {
            message: format!("adaptive Simpson reached depth {MAX_DEPTH} on [{a}, {b}]"),
            trace: vec![format!("panel error {:e} against tolerance {tol:e}", delta.abs() / 15.0)],
        });
    }
    Ok(adaptive(f, (a, fa), (m, fm), (lm, flm), left, 0.5 * tol, depth + 1)?
        + adaptive(f, (m, fm), (b, fb), (rm, frm), right, 0.5 * tol, depth + 1)?)
}

/// `int_0^1 f` by adaptive Simpson on `panels` initial panels, to relative
/// tolerance `rel_tol` (absolute when the integral is tiny).
pub fn integrate(f: impl Fn(f64) -> f64, panels: usize, rel_tol: f64) -> Result<f64> {
    if panels < 1 {
        return Err(Error::InvalidParameter("need at least one panel".into()));
    }
    // A crude pass sets the scale for the relative tolerance.
    let crude: f64 = (0..=4 * panels).map(|i| f(i as f64 / (4 * panels) as f64).abs()).sum::<f64>()
        / (4 * panels + 1) as f64;
    let tol = rel_tol * crude.max(1e-300);
    let mut total = 0.0;
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(&f, a, fa, b, fb);
        total += adaptive(&f, (a, fa), (b, fb), (m, fm), whole, tol / panels as f64, 0)?;
    }
    Ok(total)
}

/// Aggregate `g`-variation along the straight line from `a` to `b`:
/// `sum_k int_0^1 |<b - a, grad g_k(a + t(b - a))>| dt`.
pub fn continuous_aggregate_variation(a: &ProbVector, b: &ProbVector, beta: f64, quad_points: usize) -> Result<f64> {
    if quad_points < 2 {
        return Err(Error::InvalidParameter(format!("quad_points = {quad_points} < 2")));
    }
    if a.len() != b.len() {
        return Err(Error::Dimension("endpoints of different dimension".into()));
    }
    let (a, b) = (a.weights(), b.weights());
    let v: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    if beta == 0.0 || v.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let f = |t: f64| {
        let z: Vec<f64> = a.iter().zip(&v).map(|(x, d)| x + t * d).collect();
        abs_sum(&directional(&z, &v, beta))
    };
    integrate(f, quad_points - 1, 1e-8)
}

/// `[D^g(x -> x') + D^g(y -> y')] / (|x - x'|_1 + |y - y'|_1)` for the
/// straight lines between `start = (x, y)` and `end = (x', y')`.
pub fn contraction_ratio(
    start: (&ProbVector, &ProbVector),
    end: (&ProbVector, &ProbVector),
    beta: f64,
) -> Result<f64> {
    let denom = start.0.l1_distance(end.0) + start.1.l1_distance(end.1);
    if denom == 0.0 {
        return Err(Error::InvalidParameter("contraction ratio of coincident endpoints".into()));
    }
    let num = continuous_aggregate_variation(start.0, end.0, beta, 8)?
        + continuous_aggregate_variation(start.1, end.1, beta, 8)?;
    Ok(num / denom)
}

/// Largest sampled `|g(x) - g(rho)|_1 / |x - rho|_1` over points with
/// `0 < |x - rho|_1 <= radius`. Directions are uniform on the tangent plane
/// (normalized Gaussian), radii uniform in `(0, radius]`.
pub fn lipschitz_ratio_near_rho(beta: f64, q: usize, radius: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius = {radius}")));
    }
    let rho = 1.0 / q as f64;
    if radius > q as f64 * rho * 2.0 {
        return Err(Error::InvalidParameter(format!("radius {radius} leaves the simplex")));
    }
    let normal = rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < samples {
        let mut v: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(normal)).collect();
        let mean = v.iter().sum::<f64>() / q as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = abs_sum(&v);
        if norm == 0.0 {
            continue;
        }
        let r = radius * (1.0 - rng.random::<f64>());
        let x: Vec<f64> = v.iter().map(|d| rho + r * d / norm).collect();
        if x.iter().any(|&c| c < 0.0) {
            continue;
        }
        let dx: f64 = x.iter().map(|c| (c - rho).abs()).sum();
        let gx = softmax_scaled(&x, beta);
        let dg: f64 = gx.iter().map(|c| (c - rho).abs()).sum();
        worst = worst.max(dg / dx);
        taken += 1;
    }
    Ok(worst)
}

/// One sampled start/end pair and its contraction ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionSample {
    pub start: (ProbVector, ProbVector),
    pub end: (ProbVector, ProbVector),
    pub ratio: f64,
}

/// Uniform point of the simplex (flat Dirichlet).
pub fn uniform_simplex_point(q: usize, rng: &mut impl Rng) -> ProbVector {
    let w: Vec<f64> = (0..q).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let t: f64 = w.iter().sum();
    ProbVector::new(w.iter().map(|x| x / t).collect()).expect("positive weights")
}

/// A pair `(rho + u, rho + v)` with `|u|_1 + |v|_1 <= radius`, both in the
/// tangent plane, direction Gaussian and size uniform in `[0, radius]`.
pub fn near_uniform_pair(q: usize, radius: f64, rng: &mut impl Rng) -> (ProbVector, ProbVector) {
    let rho = 1.0 / q as f64;
    loop {
        let mut d: Vec<f64> = (0..2 * q).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        for half in d.chunks_mut(q) {
            let m = half.iter().sum::<f64>() / q as f64;
            half.iter_mut().for_each(|x| *x -= m);
        }
        let norm = abs_sum(&d);
        if norm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>();
        let pts: Vec<f64> = d.iter().map(|x| rho + r * x / norm).collect();
        if pts.iter().any(|&c| c < 0.0) {
            continue;
        }
        let x = ProbVector::new(pts[..q].to_vec()).expect("in simplex");
        let y = ProbVector::new(pts[q..].to_vec()).expect("in simplex");
        return (x, y);
    }
}

/// Contraction ratios from uniformly random starts to ends within `l1`
/// radius `end_radius` of `(rho, rho)`. Samples are drawn sequentially from
/// one seeded stream and evaluated in parallel.
pub fn sample_contraction_ratios(
    beta: f64,
    q: usize,
    samples: usize,
    end_radius: f64,
    seed: u64,
) -> Result<Vec<ContractionSample>> {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = (0..samples)
        .map(|_| {
            let start = (uniform_simplex_point(q, &mut rng), uniform_simplex_point(q, &mut rng));
            let end = near_uniform_pair(q, end_radius, &mut rng);
            (start, end)
        })
        .collect();
    pairs
        .into_par_iter()
        .map(|(start, end)| {
            let ratio = contraction_ratio((&start.0, &start.1), (&end.0, &end.1), beta)?;
            Ok(ContractionSample { start, end, ratio })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{beta_critical, beta_mixing, phi, solve_s};
    use crate::model::SpinConfig;

    fn random_config(q: usize, n: usize, rng: &mut impl Rng) -> BipartiteConfig {
        let mut side = || SpinConfig::new(q, (0..n).map(|_| rng.random_range(0..q) as u8).collect()).unwrap();
        BipartiteConfig::new(side(), side()).unwrap()
    }

    /// Configuration with the given counts on both sides, sites in blocks.
    fn blocks(counts: &[usize]) -> BipartiteConfig {
        let q = counts.len();
        let spins: Vec<u8> = counts
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat(k as u8).take(c))
            .collect();
        let side = SpinConfig::new(q, spins).unwrap();
        BipartiteConfig::new(side.clone(), side).unwrap()
    }

    #[test]
    fn trivial_path() {
        let a = BipartiteConfig::ordered(3, 5, 0).unwrap();
        let p = build_monotone_path(&a, &a, 0.4).unwrap();
        assert_eq!(p.waypoints.len(), 1);
        assert_eq!(p.links(), 0);
        assert_eq!(discrete_aggregate_variation(&p, 2.0), (0.0, 0.0));
        assert!(p.audit().unwrap().passed());
    }

    #[test]
    fn left_only_flip_example() {
        let a = BipartiteConfig::ordered(3, 10, 0).unwrap();
        let mut b = a.clone();
        for i in 0..10 {
            b.side_mut(Side::Left).set(i, 1);
        }
        let p = build_monotone_path(&a, &b, 0.4).unwrap();
        assert_eq!(p.units_per_link, 2);
        assert_eq!(p.links(), 5);
        for inc in p.increments() {
            assert!((inc - 0.4).abs() < 1e-15);
        }
        assert!(p.audit().unwrap().passed());
        assert_eq!(discrete_aggregate_variation(&p, 0.0), (0.0, 0.0));
    }

    #[test]
    fn parameter_errors() {
        let a = BipartiteConfig::ordered(3, 10, 0).unwrap();
        assert!(build_monotone_path(&a, &a, 0.0).is_err());
        assert!(build_monotone_path(&a, &a, 2.0).is_err());
        // eps n = 1: the only link size 2/n equals 2 eps.
        assert!(build_monotone_path(&a, &a, 0.1).is_err());
        let b = BipartiteConfig::ordered(3, 11, 0).unwrap();
        assert!(build_monotone_path(&a, &b, 0.4).is_err());
    }

    #[test]
    fn random_paths_pass_audit() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..100 {
            let a = random_config(3, 60, &mut rng);
            let b = random_config(3, 60, &mut rng);
            let p = build_monotone_path(&a, &b, 0.1).unwrap();
            let audit = p.audit().unwrap();
            assert!(audit.passed(), "{audit:?}");
            assert_eq!(p.waypoints.last().unwrap(), &b);
        }
        // Same magnetizations, different configurations: cycles only.
        let a = blocks(&[2, 2, 2]);
        let mut b = a.clone();
        b.side_mut(Side::Left).set(0, 1);
        b.side_mut(Side::Left).set(2, 0);
        let p = build_monotone_path(&a, &b, 0.4).unwrap();
        assert_eq!(p.links(), 1);
        assert!(p.audit().unwrap().passed());
    }

    #[test]
    fn quadrature_values() {
        let rho = ProbVector::uniform(3);
        let b = ProbVector::new(vec![0.8, 0.1, 0.1]).unwrap();
        assert_eq!(continuous_aggregate_variation(&rho, &rho, 1.0, 8).unwrap(), 0.0);
        assert_eq!(continuous_aggregate_variation(&rho, &b, 0.0, 8).unwrap(), 0.0);
        let v8 = continuous_aggregate_variation(&rho, &b, 1.0, 8).unwrap();
        let v16 = continuous_aggregate_variation(&rho, &b, 1.0, 16).unwrap();
        assert!((v8 - v16).abs() <= 1e-8 * v8, "{v8} vs {v16}");
        assert!(continuous_aggregate_variation(&rho, &b, 1.0, 1).is_err());
        // Linear integrand: Simpson is exact.
        let lin = integrate(|t| 3.0 * t + 1.0, 1, 1e-12).unwrap();
        assert!((lin - 2.5).abs() < 1e-15);
    }

    #[test]
    fn quadrature_matches_fine_midpoint_rule() {
        let a = ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let b = ProbVector::new(vec![0.1, 0.3, 0.6]).unwrap();
        let beta = 4.0;
        let v: Vec<f64> = b.weights().iter().zip(a.weights()).map(|(x, y)| x - y).collect();
        let m = 200_000;
        let mid: f64 = (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) / m as f64;
                let z: Vec<f64> = a.weights().iter().zip(&v).map(|(x, d)| x + t * d).collect();
                abs_sum(&directional(&z, &v, beta))
            })
            .sum::<f64>()
            / m as f64;
        let ad = continuous_aggregate_variation(&a, &b, beta, 8).unwrap();
        assert!((ad - mid).abs() < 1e-8, "{ad} vs {mid}");
    }

    fn riemann_gap(eps: f64, beta: f64) -> f64 {
        let a = blocks(&[160, 70, 70]);
        let b = blocks(&[100, 100, 100]);
        let path = build_monotone_path(&a, &b, eps).unwrap();
        assert!(path.audit().unwrap().passed());
        let (s1, s2) = discrete_aggregate_variation(&path, beta);
        let la = a.magnetizations().left.to_prob();
        let lb = b.magnetizations().left.to_prob();
        let d = 2.0 * continuous_aggregate_variation(&la, &lb, beta, 8).unwrap();
        ((s1 + s2) - d).abs() / d
    }

    #[test]
    fn riemann_sums_converge() {
        let beta = 0.9 * beta_mixing(3, 1e-12).unwrap();
        let gaps: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&e| riemann_gap(e, beta)).collect();
        assert!(gaps[0] < 0.02, "{gaps:?}");
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    }

    #[test]
    fn contraction_below_threshold() {
        let beta = 0.95 * beta_mixing(3, 1e-12).unwrap();
        let rho = ProbVector::uniform(3);
        assert_eq!(contraction_ratio((&rho, &ProbVector::vertex(3, 0)), (&rho, &rho), 0.0).unwrap(), 0.0);
        assert!(contraction_ratio((&rho, &rho), (&rho, &rho), 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut interior = || {
            let w: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
            let t: f64 = w.iter().sum();
            ProbVector::new(w.iter().map(|x| x / t).collect()).unwrap()
        };
        for _ in 0..50 {
            let (x, y) = (interior(), interior());
            let r = contraction_ratio((&x, &y), (&rho, &rho), beta).unwrap();
            assert!(r < 1.0, "ratio {r}");
        }
    }

    #[test]
    fn contraction_fails_above_criticality() {
        let beta = beta_critical(3).unwrap() + 1.0;
        let s = solve_s(beta, 3, 1e-13).unwrap().s;
        let nu = phi(s, 3).unwrap();
        let rho = ProbVector::uniform(3);
        assert!(contraction_ratio((&nu, &nu), (&rho, &rho), beta).unwrap() >= 1.0);
    }

    #[test]
    fn lipschitz_near_rho() {
        assert_eq!(lipschitz_ratio_near_rho(0.0, 3, 1e-3, 100, 0).unwrap(), 0.0);
        let beta = 0.9 * beta_mixing(3, 1e-12).unwrap();
        let r = lipschitz_ratio_near_rho(beta, 3, 1e-3, 10_000, 7).unwrap();
        assert!(r < 1.0);
        // On the tangent plane the Jacobian at rho is (beta/q) times the identity.
        let limit = beta / 3.0;
        let coarse = (lipschitz_ratio_near_rho(beta, 3, 1e-2, 2000, 7).unwrap() - limit).abs();
        let fine = (lipschitz_ratio_near_rho(beta, 3, 1e-4, 2000, 7).unwrap() - limit).abs();
        assert!(fine < coarse && fine < 1e-4, "{coarse} {fine}");
        assert!(lipschitz_ratio_near_rho(1.0, 3, 0.0, 10, 0).is_err());
    }
}
