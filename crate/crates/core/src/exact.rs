//! Brute-force enumeration of small instances: partition function, Gibbs
//! probabilities, the exact Glauber kernel and the law of the magnetization
//! pair. Everything here is computed from energies of explicit
//! configurations and is the reference the fast paths are tested against.
//!
//! Configurations are indexed in mixed radix: site `i` of the left side has
//! weight `q^i`, site `i` of the right side has weight `q^(n+i)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernel::SparseKernel;
use crate::model::{
    hamiltonian, hamiltonian_exact, BipartiteConfig, MagnetizationPair, ModelParams, Side,
    SpinConfig,
};

/// Default limit on the number of enumerated configurations.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Number of configurations `q^(2n)`, saturating.
pub fn state_count(params: &ModelParams) -> u128 {
    (params.q() as u128)
        .checked_pow(2 * params.n() as u32)
        .unwrap_or(u128::MAX)
}

fn check_cap(params: &ModelParams, cap: u128) -> Result<usize> {
    let states = state_count(params);
    if states > cap {
        return Err(Error::Infeasible { states, cap });
    }
    Ok(states as usize)
}

/// Decodes a mixed-radix index into a configuration.
pub fn config_from_index(params: &ModelParams, mut index: usize) -> BipartiteConfig {
    let (q, n) = (params.q(), params.n());
    let mut digits = vec![0u8; 2 * n];
    for d in digits.iter_mut() {
        *d = (index % q) as u8;
        index /= q;
    }
    let right = digits.split_off(n);
    BipartiteConfig::new(
        SpinConfig::new(q, digits).expect("digits below q"),
        SpinConfig::new(q, right).expect("digits below q"),
    )
    .expect("equal sides")
}

pub fn index_of(cfg: &BipartiteConfig) -> usize {
    let q = cfg.q();
    cfg.left()
        .spins()
        .iter()
        .chain(cfg.right().spins())
        .rev()
        .fold(0usize, |acc, &s| acc * q + s as usize)
}

/// The canonical ensemble on all `q^(2n)` configurations.
#[derive(Clone, Debug)]
pub struct ExactEnsemble {
    params: ModelParams,
    log_z: f64,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ExactEnsemble {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_cap(params, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_cap(params: ModelParams, cap: u128) -> Result<Self> {
        let states = check_cap(&params, cap)?;
        let beta = params.beta();
        let n = params.n() as f64;
        // -beta*H <= beta*n, attained by the aligned configurations.
        let shift = beta * n;
        let mut weights = Vec::with_capacity(states);
        for index in 0..states {
            let h = hamiltonian(&config_from_index(&params, index));
            weights.push((-beta * h - shift).exp());
        }
        let total = pairwise_sum(&weights);
        let log_z = total.ln() + shift - 2.0 * n * (params.q() as f64).ln();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(states);
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self {
            params,
            log_z,
            probs,
            cumulative,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `log Z` where `Z` averages `exp(-beta H)` over the product measure.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Draws a configuration index from a uniform variate `u` in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let target = u * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.probs.len() - 1)
    }
}

/// Tree reduction so the result does not depend on chunking.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `Z = q^(-2n) sum exp(-beta H_n)`.
pub fn partition_function(params: &ModelParams) -> Result<f64> {
    partition_function_with_cap(params, DEFAULT_ENUMERATION_CAP)
}

pub fn partition_function_with_cap(params: &ModelParams, cap: u128) -> Result<f64> {
    Ok(ExactEnsemble::with_cap(*params, cap)?.log_z().exp())
}

pub fn gibbs_prob(ens: &ExactEnsemble, cfg: &BipartiteConfig) -> Result<f64> {
    if cfg.n() != ens.params.n() || cfg.q() != ens.params.q() {
        return Err(Error::Dimension(format!(
            "configuration (n={}, q={}) against ensemble (n={}, q={})",
            cfg.n(),
            cfg.q(),
            ens.params.n(),
            ens.params.q()
        )));
    }
    Ok(ens.probs[index_of(cfg)])
}

/// Conditional Gibbs law of the spin at `(side, vertex)` given all other
/// spins, from exact energy differences of the `q` candidate configurations.
pub fn conditional_gibbs(
    params: &ModelParams,
    cfg: &BipartiteConfig,
    side: Side,
    vertex: usize,
) -> Vec<f64> {
    let q = params.q();
    let mut candidate = cfg.clone();
    let energies: Vec<_> = (0..q)
        .map(|k| {
            candidate.side_mut(side).set(vertex, k);
            hamiltonian_exact(&candidate)
        })
        .collect();
    let lowest = *energies.iter().min().expect("q >= 2");
    let weights: Vec<f64> = energies
        .iter()
        .map(|&h| {
            let gap = h - lowest;
            let gap = *gap.numer() as f64 / *gap.denom() as f64;
            (-params.beta() * gap).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Full single-site heat-bath kernel: a uniform vertex among the `2n`, then
/// resampling from [`conditional_gibbs`].
pub fn exact_glauber_kernel(params: &ModelParams) -> Result<SparseKernel> {
    exact_glauber_kernel_with_cap(params, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_glauber_kernel_with_cap(params: &ModelParams, cap: u128) -> Result<SparseKernel> {
    let states = check_cap(params, cap)?;
    let (q, n) = (params.q(), params.n());
    let pick = 1.0 / (2 * n) as f64;
    let rows = (0..states).map(|x| {
        let cfg = config_from_index(params, x);
        let mut row = Vec::with_capacity(2 * n * (q - 1) + 1);
        for side in [Side::Left, Side::Right] {
            let offset = if side == Side::Left { 0 } else { n };
            for i in 0..n {
                let cond = conditional_gibbs(params, &cfg, side, i);
                let current = cfg.side(side).get(i);
                let weight = q.pow((offset + i) as u32);
                for (k, p) in cond.into_iter().enumerate() {
                    let y = x + k * weight - current * weight;
                    row.push((y, pick * p));
                }
            }
        }
        row
    });
    Ok(SparseKernel::from_rows(rows))
}

/// Exact law of `(L_n(sigma), L_n(tau))` under the Gibbs measure.
#[derive(Clone, Debug)]
pub struct Pushforward {
    pub table: BTreeMap<MagnetizationPair, f64>,
}

impl Pushforward {
    pub fn prob(&self, pair: &MagnetizationPair) -> f64 {
        self.table.get(pair).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.table.values().sum()
    }

    /// Most probable pair; ties resolve to the smallest pair in lexicographic
    /// order.
    pub fn mode(&self) -> Option<(&MagnetizationPair, f64)> {
        self.table
            .iter()
            .fold(None, |best: Option<(&MagnetizationPair, f64)>, (k, &v)| {
                match best {
                    Some((_, b)) if b >= v => best,
                    _ => Some((k, v)),
                }
            })
    }
}

pub fn magnetization_pushforward(ens: &ExactEnsemble) -> Pushforward {
    let mut table = BTreeMap::new();
    for (index, &p) in ens.probs.iter().enumerate() {
        let pair = config_from_index(&ens.params, index).magnetizations();
        *table.entry(pair).or_insert(0.0) += p;
    }
    Pushforward { table }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticePoint;

    fn params(q: usize, n: usize, beta: f64) -> ModelParams {
        ModelParams::new(q, n, beta).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let p = params(3, 2, 0.0);
        for x in 0..81 {
            assert_eq!(index_of(&config_from_index(&p, x)), x);
        }
    }

    #[test]
    fn partition_function_values() {
        for (q, n) in [(2, 1), (3, 2), (2, 3)] {
            let z = partition_function(&params(q, n, 0.0)).unwrap();
            assert!((z - 1.0).abs() < 1e-14);
        }
        for beta in [0.3, 1.0, 4.0] {
            let z = partition_function(&params(2, 1, beta)).unwrap();
            assert!((z - (beta.exp() + 1.0) / 2.0).abs() < 1e-13 * z);
        }
        // Independent enumeration of the 81 configurations.
        let z = partition_function(&params(3, 2, 1.0)).unwrap();
        assert!((z - 2.1925262298533408).abs() < 1e-13);
    }

    #[test]
    fn cap_is_enforced() {
        let err = partition_function_with_cap(&params(3, 4, 1.0), 1000).unwrap_err();
        assert_eq!(
            err,
            Error::Infeasible {
                states: 6561,
                cap: 1000
            }
        );
        assert!(exact_glauber_kernel_with_cap(&params(3, 4, 1.0), 1000).is_err());
    }

    #[test]
    fn large_beta_does_not_overflow() {
        let ens = ExactEnsemble::new(params(2, 6, 10.0)).unwrap();
        assert!(ens.log_z().is_finite());
        assert!((ens.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_probabilities() {
        let ens = ExactEnsemble::new(params(3, 2, 0.0)).unwrap();
        assert!(ens.probs().iter().all(|&p| (p - 1.0 / 81.0).abs() < 1e-16));
        let beta = 0.8;
        let ens = ExactEnsemble::new(params(2, 1, beta)).unwrap();
        let aligned = BipartiteConfig::ordered(2, 1, 0).unwrap();
        let p = gibbs_prob(&ens, &aligned).unwrap();
        assert!((p - beta.exp() / (2.0 * (beta.exp() + 1.0))).abs() < 1e-15);
        assert!(gibbs_prob(&ens, &BipartiteConfig::ordered(2, 2, 0).unwrap()).is_err());
        let ens = ExactEnsemble::new(params(3, 3, 1.3)).unwrap();
        assert!((ens.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for x in [0, 17, 400] {
            let cfg = config_from_index(ens.params(), x);
            let expected = (-1.3 * hamiltonian(&cfg)).exp() / 3f64.powi(6) / ens.log_z().exp();
            assert!((gibbs_prob(&ens, &cfg).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_rows_and_balance() {
        for (q, n, beta) in [(2, 2, 0.7), (3, 2, 1.5), (2, 3, 2.0)] {
            let p = params(q, n, beta);
            let k = exact_glauber_kernel(&p).unwrap();
            assert!(k.max_row_sum_error() < 1e-12);
            let ens = ExactEnsemble::new(p).unwrap();
            assert!(k.stationarity_residual(ens.probs()).unwrap() <= 1e-12);
            assert!(k.detailed_balance_residual(ens.probs()) <= 1e-12);
        }
    }

    #[test]
    fn kernel_at_zero_beta_resamples_uniformly() {
        let (q, n) = (3, 2);
        let k = exact_glauber_kernel(&params(q, n, 0.0)).unwrap();
        let x = 5;
        let cfg = config_from_index(&params(q, n, 0.0), x);
        let mut single_flip = 0;
        for y in 0..81 {
            let d = crate::model::config_distance(&cfg, &config_from_index(&params(q, n, 0.0), y))
                .unwrap();
            let v = k.get(x, y);
            match d {
                0 => assert!((v - 1.0 / q as f64).abs() < 1e-15),
                1 => {
                    single_flip += 1;
                    assert!((v - 1.0 / (2 * n * q) as f64).abs() < 1e-15);
                }
                _ => assert_eq!(v, 0.0),
            }
        }
        assert_eq!(single_flip, 2 * n * (q - 1));
    }

    #[test]
    fn pushforward_values() {
        let ens = ExactEnsemble::new(params(2, 2, 0.0)).unwrap();
        let push = magnetization_pushforward(&ens);
        assert!((push.total() - 1.0).abs() < 1e-12);
        let balanced: f64 = push
            .table
            .iter()
            .filter(|(k, _)| k.left.counts() == [1, 1])
            .map(|(_, v)| v)
            .sum();
        assert!((balanced - 0.5).abs() < 1e-15);

        // Full enumeration (independent script): at beta = 1 the entropy of
        // the balanced pair outweighs the alignment energy.
        let ens = ExactEnsemble::new(params(3, 3, 1.0)).unwrap();
        let push = magnetization_pushforward(&ens);
        let (mode, p) = push.mode().unwrap();
        let uniform = LatticePoint::new(vec![1, 1, 1]).unwrap();
        assert_eq!(mode, &MagnetizationPair::new(uniform.clone(), uniform).unwrap());
        assert!((p - 0.04387622368989849).abs() < 1e-14);
    }

    #[test]
    fn pushforward_concentrates_on_ordered_diagonal() {
        let q = 3;
        let beta_c = 4.0 * 2f64.ln();
        let ens = ExactEnsemble::new(params(q, 6, beta_c + 0.5)).unwrap();
        let push = magnetization_pushforward(&ens);
        let uniform = LatticePoint::new(vec![2, 2, 2]).unwrap();
        let at_uniform = push.prob(&MagnetizationPair::new(uniform.clone(), uniform.clone()).unwrap());
        let diagonal: f64 = push
            .table
            .iter()
            .filter(|(k, _)| k.left == k.right && k.left != uniform)
            .map(|(_, v)| v)
            .sum();
        assert!(diagonal > at_uniform);
    }

    #[test]
    fn sampling_follows_cumulative() {
        let ens = ExactEnsemble::new(params(2, 1, 1.0)).unwrap();
        assert_eq!(ens.sample_index(0.0), 0);
        assert_eq!(ens.sample_index(0.999999), 3);
    }
}
