//! Oracle comparison suites. Each check records what was measured against
//! which tolerance; a suite passes when all its checks do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupled_transitions, coupled_update_dist, CouplingState};
use crate::equilibrium::beta_critical;
use crate::error::{Error, Result};
use crate::exact::{
    conditional_gibbs, config_from_index, exact_glauber_kernel, index_of, state_count, ExactEnsemble,
};
use crate::glauber::{g_map, RngSpec};
use crate::kernel::{total_variation, SparseKernel};
use crate::ldp::duality_gap;
use crate::model::{BipartiteConfig, ModelParams, ProbVector, Side, SpinConfig};
use crate::paths::build_monotone_path;

/// Law of a freshly updated spin given the opposite side's magnetization.
pub type UpdateLaw = fn(&ProbVector, f64) -> ProbVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Stationarity,
    KernelExactness,
    Duality,
    CouplingMarginals,
    PathAudit,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = [
        "stationarity",
        "kernel-exactness",
        "duality",
        "coupling-marginals",
        "path-audit",
        "all",
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "stationarity" => Suite::Stationarity,
            "kernel-exactness" => Suite::KernelExactness,
            "duality" => Suite::Duality,
            "coupling-marginals" => Suite::CouplingMarginals,
            "path-audit" => Suite::PathAudit,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown suite {other:?}; expected one of {:?}",
                    Self::NAMES
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Stationarity => "stationarity",
            Suite::KernelExactness => "kernel-exactness",
            Suite::Duality => "duality",
            Suite::CouplingMarginals => "coupling-marginals",
            Suite::PathAudit => "path-audit",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub law: UpdateLaw,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { law: g_map, seed: 0 }
    }
}

fn check(suite: Suite, name: String, measured: f64, tolerance: f64, detail: String) -> Check {
    Check {
        suite: suite.name().into(),
        name,
        // NaN never passes.
        passed: measured <= tolerance,
        measured,
        tolerance,
        detail,
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Stationarity => stationarity(opts)?,
        Suite::KernelExactness => kernel_exactness(opts)?,
        Suite::Duality => duality()?,
        Suite::CouplingMarginals => coupling_marginals(opts)?,
        Suite::PathAudit => path_audit(opts)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Stationarity,
                Suite::KernelExactness,
                Suite::Duality,
                Suite::CouplingMarginals,
                Suite::PathAudit,
            ] {
                all.extend(run_suite(s, opts)?.checks);
            }
            all
        }
    };
    Ok(VerifyReport {
        suite: suite.name().into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Heat-bath kernel on all configurations with the update law `law`.
pub fn kernel_from_law(params: &ModelParams, law: UpdateLaw) -> Result<SparseKernel> {
    let states = state_count(params);
    if states > crate::exact::DEFAULT_ENUMERATION_CAP {
        return Err(Error::Infeasible {
            states,
            cap: crate::exact::DEFAULT_ENUMERATION_CAP,
        });
    }
    let (q, n) = (params.q(), params.n());
    let pick = 1.0 / (2 * n) as f64;
    let rows = (0..states as usize).map(|x| {
        let cfg = config_from_index(params, x);
        let mags = cfg.magnetizations();
        let mut row = Vec::new();
        for side in [Side::Left, Side::Right] {
            let p = law(&mags.side(side.opposite()).to_prob(), params.beta());
            let offset = if side == Side::Left { 0 } else { n };
            for i in 0..n {
                let current = cfg.side(side).get(i);
                let weight = q.pow((offset + i) as u32);
                for (k, &pk) in p.weights().iter().enumerate() {
                    row.push((x + k * weight - current * weight, pick * pk));
                }
            }
        }
        row
    });
    Ok(SparseKernel::from_rows(rows))
}

/// Critical inverse temperature, with its `q -> 2` limit `2` at `q = 2`.
pub fn critical_or_limit(q: usize) -> Result<f64> {
    if q == 2 {
        Ok(2.0)
    } else {
        beta_critical(q)
    }
}

pub const STATIONARITY_TOL: f64 = 1e-12;

fn stationarity(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (q, n) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        for beta in [0.0, 0.5, 1.5, critical_or_limit(q)?] {
            let params = ModelParams::new(q, n, beta)?;
            let pi = ExactEnsemble::new(params)?;
            let k = kernel_from_law(&params, opts.law)?;
            let residual = k.stationarity_residual(pi.probs())?;
            out.push(check(
                Suite::Stationarity,
                format!("q={q} n={n} beta={beta}"),
                residual,
                STATIONARITY_TOL,
                format!("max |pi K - pi| over {} states", pi.probs().len()),
            ));
        }
    }
    Ok(out)
}

pub const KERNEL_EXACTNESS_TOL: f64 = 1e-14;

fn random_config(q: usize, n: usize, rng: &mut impl Rng) -> BipartiteConfig {
    let mut side = || {
        SpinConfig::new(q, (0..n).map(|_| rng.random_range(0..q) as u8).collect()).expect("valid spins")
    };
    BipartiteConfig::new(side(), side()).expect("same shape")
}

fn kernel_exactness(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    for (q, n) in [(2, 3), (3, 10), (4, 25), (5, 50)] {
        let mut worst: f64 = 0.0;
        for _ in 0..250 {
            let beta = rng.random_range(0.0..6.0);
            let params = ModelParams::new(q, n, beta)?;
            let cfg = random_config(q, n, &mut rng);
            let side = if rng.random::<bool>() { Side::Left } else { Side::Right };
            let v = rng.random_range(0..n);
            let exact = conditional_gibbs(&params, &cfg, side, v);
            let law = (opts.law)(&cfg.magnetizations().side(side.opposite()).to_prob(), beta);
            for (a, b) in exact.iter().zip(law.weights()) {
                worst = worst.max((a - b).abs());
            }
        }
        out.push(check(
            Suite::KernelExactness,
            format!("q={q} n={n}"),
            worst,
            KERNEL_EXACTNESS_TOL,
            "max |conditional Gibbs - update law| over 250 random states".into(),
        ));
    }
    Ok(out)
}

pub const DUALITY_TOL: f64 = 1e-6;

fn duality() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for beta in [1.0, 2.5, 3.5] {
        out.push(check(
            Suite::Duality,
            format!("q=3 beta={beta}"),
            duality_gap(beta, 3)?,
            DUALITY_TOL,
            "|sup alpha + inf_x G(x, x)|".into(),
        ));
    }
    Ok(out)
}

fn coupling_marginals(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let suite = Suite::CouplingMarginals;
    let mut out = Vec::new();

    // Exact marginals of the coupled kernel at (q, n) = (3, 2).
    let params = ModelParams::new(3, 2, 1.3)?;
    let k = kernel_from_law(&params, opts.law)?;
    let exact = exact_glauber_kernel(&params)?;
    let states = state_count(&params) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    let mut worst_law: f64 = 0.0;
    for xi in 0..states {
        let yi = rng.random_range(0..states);
        let (x, y) = (config_from_index(&params, xi), config_from_index(&params, yi));
        let mut mx = vec![0.0; states];
        let mut my = vec![0.0; states];
        for (a, b, p) in coupled_transitions(&params, &x, &y)? {
            mx[index_of(&a)] += p;
            my[index_of(&b)] += p;
        }
        for j in 0..states {
            worst = worst.max((mx[j] - exact.get(xi, j)).abs());
            worst = worst.max((my[j] - exact.get(yi, j)).abs());
            worst_law = worst_law.max((k.get(xi, j) - exact.get(xi, j)).abs());
        }
    }
    out.push(check(
        suite,
        "joint kernel marginals q=3 n=2".into(),
        worst.max(worst_law),
        1e-13,
        "max deviation of either marginal from the exact Glauber kernel".into(),
    ));

    // Mismatch probability equals total variation.
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = rng.random_range(2..7);
        let mut draw = || {
            let w: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
            let t: f64 = w.iter().sum();
            ProbVector::new(w.iter().map(|x| x / t).collect())
        };
        let (a, b) = (draw()?, draw()?);
        let j = coupled_update_dist(&a, &b)?;
        worst = worst.max((j.mismatch() - total_variation(a.weights(), b.weights())).abs());
        for (m, w) in j.first_marginal().iter().zip(a.weights()) {
            worst = worst.max((m - w).abs());
        }
        for (m, w) in j.second_marginal().iter().zip(b.weights()) {
            worst = worst.max((m - w).abs());
        }
    }
    out.push(check(
        suite,
        "mismatch equals total variation".into(),
        worst,
        1e-14,
        "1000 random pairs of laws, q in 2..7; marginals included".into(),
    ));

    // Coupling inequality at (3, 3): exact TV of the two time-t laws against
    // the estimated mismatch probability from the same starts.
    let params = ModelParams::new(3, 3, 1.0)?;
    let k = exact_glauber_kernel(&params)?;
    let (x0, y0) = (
        BipartiteConfig::ordered(3, 3, 0)?,
        BipartiteConfig::ordered(3, 3, 1)?,
    );
    let t_max = 50;
    let replicas = 4000;
    let mut mx = vec![0.0; k.n_states()];
    let mut my = mx.clone();
    mx[index_of(&x0)] = 1.0;
    my[index_of(&y0)] = 1.0;
    let mut tv = Vec::new();
    for _ in 0..t_max {
        mx = k.push_forward(&mx)?;
        my = k.push_forward(&my)?;
        tv.push(total_variation(&mx, &my));
    }
    let mut apart = vec![0usize; t_max];
    for r in 0..replicas {
        let mut rng = RngSpec::new(opts.seed, r as u64).rng();
        let mut cs = CouplingState::new(params, x0.clone(), y0.clone())?;
        for slot in apart.iter_mut() {
            cs.step(&mut rng);
            *slot += usize::from(cs.distance() > 0);
        }
    }
    let mut excess = f64::NEG_INFINITY;
    for (&d, &hits) in tv.iter().zip(&apart) {
        let p = hits as f64 / replicas as f64;
        let pf = (hits as f64 + 1.0) / (replicas as f64 + 2.0);
        let se = (pf * (1.0 - pf) / replicas as f64).sqrt();
        let z = (d - p) / se;
        if z > excess {
            excess = z;
        }
    }
    out.push(check(
        suite,
        "coupling inequality q=3 n=3 t<=50".into(),
        excess,
        3.0,
        "max over t of (TV_t - P(X_t != Y_t)) / stderr".into(),
    ));
    Ok(out)
}

fn path_audit(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut failures = 0;
    for _ in 0..100 {
        let a = random_config(3, 60, &mut rng);
        let b = random_config(3, 60, &mut rng);
        let path = build_monotone_path(&a, &b, 0.1)?;
        let audit = path.audit()?;
        if !audit.passed() || path.waypoints.last() != Some(&b) {
            failures += 1;
        }
    }
    Ok(vec![check(
        Suite::PathAudit,
        "monotone paths q=3 n=60 eps=0.1".into(),
        failures as f64,
        0.0,
        "failed audits (additivity, monotonicity, spacing) over 100 random endpoint pairs".into(),
    )])
}
