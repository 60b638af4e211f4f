//! Configurations, magnetizations and the exact energy of the Potts model on
//! the complete bipartite graph `K_{n,n}`.
//!
//! Spins are stored as 0-based integers in `0..q`. The one-hot basis vectors
//! only appear implicitly through magnetization counts.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of spin states.
pub const MAX_Q: usize = 64;

/// Tolerance used when validating probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Ensemble parameters `(q, n, beta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    q: usize,
    n: usize,
    beta: f64,
}

impl ModelParams {
    pub fn new(q: usize, n: usize, beta: f64) -> Result<Self> {
        if !(2..=MAX_Q).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in 2..={MAX_Q}, got {q}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self { q, n, beta })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.q, self.n, beta)
    }

    /// Phase formulas are only defined for three or more states.
    pub fn require_q_at_least_3(&self) -> Result<()> {
        require_q_at_least_3(self.q)
    }
}

pub(crate) fn require_q_at_least_3(q: usize) -> Result<()> {
    if q < 3 {
        return Err(Error::Unsupported(format!(
            "phase formulas need q >= 3, got q = {q}"
        )));
    }
    if q > MAX_Q {
        return Err(Error::InvalidParameter(format!("q = {q} exceeds {MAX_Q}")));
    }
    Ok(())
}

/// Which half of `K_{n,n}` a vertex belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Spin assignment for one side of the graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    q: usize,
    spins: Vec<u8>,
}

impl SpinConfig {
    pub fn new(q: usize, spins: Vec<u8>) -> Result<Self> {
        if !(2..=MAX_Q).contains(&q) {
            return Err(Error::InvalidParameter(format!("q = {q} out of range")));
        }
        if spins.is_empty() {
            return Err(Error::InvalidParameter("empty spin configuration".into()));
        }
        if let Some((i, s)) = spins.iter().enumerate().find(|(_, &s)| s as usize >= q) {
            return Err(Error::InvalidParameter(format!(
                "spin {s} at site {i} is not below q = {q}"
            )));
        }
        Ok(Self { q, spins })
    }

    /// All `n` spins set to state `k`.
    pub fn constant(q: usize, n: usize, k: usize) -> Result<Self> {
        if k >= q {
            return Err(Error::InvalidParameter(format!("state {k} >= q = {q}")));
        }
        Self::new(q, vec![k as u8; n])
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }

    pub fn get(&self, i: usize) -> usize {
        self.spins[i] as usize
    }

    pub(crate) fn set(&mut self, i: usize, k: usize) {
        debug_assert!(k < self.q);
        self.spins[i] = k as u8;
    }
}

/// A microstate `(sigma, tau)` of `K_{n,n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BipartiteConfig {
    left: SpinConfig,
    right: SpinConfig,
}

impl BipartiteConfig {
    pub fn new(left: SpinConfig, right: SpinConfig) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::Dimension(format!(
                "left side has {} sites, right side has {}",
                left.len(),
                right.len()
            )));
        }
        if left.q() != right.q() {
            return Err(Error::Dimension(format!(
                "left side uses q = {}, right side uses q = {}",
                left.q(),
                right.q()
            )));
        }
        Ok(Self { left, right })
    }

    /// Both sides entirely in state `k`.
    pub fn ordered(q: usize, n: usize, k: usize) -> Result<Self> {
        Self::new(SpinConfig::constant(q, n, k)?, SpinConfig::constant(q, n, k)?)
    }

    pub fn left(&self) -> &SpinConfig {
        &self.left
    }

    pub fn right(&self) -> &SpinConfig {
        &self.right
    }

    pub fn side(&self, side: Side) -> &SpinConfig {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub(crate) fn side_mut(&mut self, side: Side) -> &mut SpinConfig {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn n(&self) -> usize {
        self.left.len()
    }

    pub fn q(&self) -> usize {
        self.left.q()
    }

    pub fn magnetizations(&self) -> MagnetizationPair {
        MagnetizationPair {
            left: magnetization(&self.left),
            right: magnetization(&self.right),
        }
    }
}

/// A point of the probability simplex `P_q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity and normalization within [`SIMPLEX_TOL`], then
    /// renormalizes to remove the residual drift.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::NotNormalized(format!(
                "need at least 2 coordinates, got {}",
                weights.len()
            )));
        }
        let mut weights = weights;
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() || *w < -SIMPLEX_TOL {
                return Err(Error::NotNormalized(format!("coordinate {i} is {w}")));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotNormalized(format!(
                "weights sum to {total:.17}, off by more than {SIMPLEX_TOL}"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self(weights))
    }

    /// For vectors normalized by construction (softmax outputs and the like).
    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self(weights)
    }

    /// The uniform vector `rho = (1/q, ..., 1/q)`.
    pub fn uniform(q: usize) -> Self {
        Self(vec![1.0 / q as f64; q])
    }

    /// The basis vector `e^{k+1}` (0-based `k`).
    pub fn vertex(q: usize, k: usize) -> Self {
        let mut w = vec![0.0; q];
        w[k] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &ProbVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn l1_distance(&self, other: &ProbVector) -> f64 {
        l1(&self.0, &other.0)
    }

    /// Swaps coordinates `a` and `b`.
    pub fn swapped(&self, a: usize, b: usize) -> ProbVector {
        let mut w = self.0.clone();
        w.swap(a, b);
        Self(w)
    }

    /// `(1 - t) * self + t * other` for `t` in `[0, 1]`.
    pub fn lerp(&self, other: &ProbVector, t: f64) -> ProbVector {
        let w = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Self(w)
    }
}

/// Counts of each spin value; an element of the lattice simplex `P_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    counts: Vec<u32>,
}

impl LatticePoint {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidParameter("need q >= 2 counts".into()));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidParameter("counts sum to 0".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn q(&self) -> usize {
        self.counts.len()
    }

    /// Proportions `counts / n`.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn to_prob(&self) -> ProbVector {
        ProbVector(self.proportions())
    }

    pub(crate) fn counts_mut(&mut self) -> &mut [u32] {
        &mut self.counts
    }
}

/// The pair `(L_n(sigma), L_n(tau))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MagnetizationPair {
    pub left: LatticePoint,
    pub right: LatticePoint,
}

impl MagnetizationPair {
    pub fn new(left: LatticePoint, right: LatticePoint) -> Result<Self> {
        if left.n() != right.n() || left.q() != right.q() {
            return Err(Error::Dimension(format!(
                "sides disagree: (n={}, q={}) vs (n={}, q={})",
                left.n(),
                left.q(),
                right.n(),
                right.q()
            )));
        }
        Ok(Self { left, right })
    }

    pub fn side(&self, side: Side) -> &LatticePoint {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub(crate) fn side_mut(&mut self, side: Side) -> &mut LatticePoint {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Combined l1 distance of the normalized magnetizations.
    pub fn l1_distance(&self, other: &MagnetizationPair) -> f64 {
        l1(&self.left.proportions(), &other.left.proportions())
            + l1(&self.right.proportions(), &other.right.proportions())
    }
}

pub fn magnetization(cfg: &SpinConfig) -> LatticePoint {
    let mut counts = vec![0u32; cfg.q()];
    for &s in cfg.spins() {
        counts[s as usize] += 1;
    }
    LatticePoint { counts }
}

/// `n * <L_n(sigma), L_n(tau)>` as an exact integer divided by `n`, i.e. the
/// number of agreeing (left, right) vertex pairs.
fn agreeing_pairs(cfg: &BipartiteConfig) -> i64 {
    let l = magnetization(cfg.left());
    let r = magnetization(cfg.right());
    l.counts()
        .iter()
        .zip(r.counts())
        .map(|(&a, &b)| a as i64 * b as i64)
        .sum()
}

/// `H_n(sigma, tau) = -n <L_n(sigma), L_n(tau)>`, computed in `O(n + q)`.
pub fn hamiltonian(cfg: &BipartiteConfig) -> f64 {
    -(agreeing_pairs(cfg) as f64) / cfg.n() as f64
}

/// Exact rational form of [`hamiltonian`].
pub fn hamiltonian_exact(cfg: &BipartiteConfig) -> Ratio<i64> {
    Ratio::new(-agreeing_pairs(cfg), cfg.n() as i64)
}

/// Direct double sum `-(1/n) sum_{i,j} delta(sigma_i, tau_j)`, `O(n^2)`.
pub fn hamiltonian_pairwise(cfg: &BipartiteConfig) -> Ratio<i64> {
    let agree = cfg
        .left()
        .spins()
        .iter()
        .map(|a| cfg.right().spins().iter().filter(|&b| a == b).count() as i64)
        .sum::<i64>();
    Ratio::new(-agree, cfg.n() as i64)
}

/// Interaction representation `H(x, y) = -<x, y>`.
pub fn interaction_h(x: &ProbVector, y: &ProbVector) -> f64 {
    -x.dot(y)
}

/// Number of disagreeing sites on one side.
pub fn spin_distance(a: &SpinConfig, b: &SpinConfig) -> Result<usize> {
    if a.len() != b.len() || a.q() != b.q() {
        return Err(Error::Dimension(format!(
            "configurations of size (n={}, q={}) and (n={}, q={})",
            a.len(),
            a.q(),
            b.len(),
            b.q()
        )));
    }
    Ok(a.spins()
        .iter()
        .zip(b.spins())
        .filter(|(x, y)| x != y)
        .count())
}

/// Discrepancy distance `d(sigma, sigma') + d(tau, tau')`.
pub fn config_distance(a: &BipartiteConfig, b: &BipartiteConfig) -> Result<usize> {
    Ok(spin_distance(a.left(), b.left())? + spin_distance(a.right(), b.right())?)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
