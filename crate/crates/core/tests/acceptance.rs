//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use bipotts::coupling::one_step_slack_survey;
use bipotts::equilibrium::{beta_critical, beta_mixing, macrostates, phi, solve_s};
use bipotts::exact::{magnetization_pushforward, ExactEnsemble};
use bipotts::ldp::alpha_diag;
use bipotts::mixing::{
    coupling_sandwich, coupling_time_scaling, exact_tv_curve, slow_mixing_probe, ProjectedChain, ScalingFit,
};
use bipotts::paths::{
    build_monotone_path, continuous_aggregate_variation, discrete_aggregate_variation, lipschitz_ratio_near_rho,
    sample_contraction_ratios,
};
use bipotts::verify::{run_suite, Suite, VerifyOptions};
use bipotts::{BipartiteConfig, ModelParams, ProbVector, SpinConfig};
use rayon::prelude::*;

type Outcome = bipotts::Result<(bool, String)>;

const SEED: u64 = 20240601;

fn suite(s: Suite) -> Outcome {
    let report = run_suite(s, &VerifyOptions { seed: SEED, ..Default::default() })?;
    let worst = report
        .checks
        .iter()
        .map(|c| c.measured / c.tolerance)
        .fold(0.0, f64::max);
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    Ok((
        report.passed,
        format!(
            "{} checks, worst measured/tolerance = {worst:.3e}{}",
            report.checks.len(),
            if failed.is_empty() { String::new() } else { format!(", failed: {failed:?}") }
        ),
    ))
}

fn stationarity() -> Outcome {
    let t = Instant::now();
    let (ok, detail) = suite(Suite::Stationarity)?;
    let secs = t.elapsed().as_secs_f64();
    Ok((ok && secs < 60.0, format!("{detail}; {secs:.1} s (limit 60 s)")))
}

fn phase_checkpoints() -> Outcome {
    let mut ok = true;
    let mut worst_s: f64 = 0.0;
    for q in 3..=5 {
        let s = solve_s(beta_critical(q)?, q, 1e-14)?.s;
        worst_s = worst_s.max((s - (q as f64 - 2.0) / (q as f64 - 1.0)).abs());
    }
    ok &= worst_s <= 1e-10;
    let bc = beta_critical(3)?;
    let bc_err = (bc - 4.0 * 2f64.ln()).abs();
    ok &= bc_err <= 1e-12;
    let counts = [
        macrostates(bc - 0.1, 3, 1e-12)?.macrostates.len(),
        macrostates(bc + 0.1, 3, 1e-12)?.macrostates.len(),
        macrostates(bc, 3, 1e-12)?.macrostates.len(),
    ];
    ok &= counts == [1, 3, 4];
    let tie = (alpha_diag(bc, &ProbVector::uniform(3)) - alpha_diag(bc, &phi(0.5, 3)?)).abs();
    ok &= tie <= 1e-9;
    Ok((
        ok,
        format!(
            "max |s(beta_c) - (q-2)/(q-1)| = {worst_s:.2e}; |beta_c(3) - 4 ln 2| = {bc_err:.2e}; \
             macrostates below/above/at beta_c = {counts:?}; alpha tie gap = {tie:.2e}"
        ),
    ))
}

/// Largest `g_k(x) - x_k` over a barycentric grid of the `q = 3` simplex,
/// restricted to coordinates with `x_k > 1/3`. The threshold holds at `beta`
/// when this is negative.
fn worst_drift(beta: f64, steps: usize) -> f64 {
    let third = 1.0 / 3.0;
    (0..=steps)
        .into_par_iter()
        .map(|i| {
            let mut worst = f64::NEG_INFINITY;
            for j in 0..=steps - i {
                let x = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = x.iter().map(|v| (beta * (v - m)).exp()).collect();
                let z: f64 = w.iter().sum();
                for k in 0..3 {
                    if x[k] > third + 1e-9 {
                        worst = worst.max(w[k] / z - x[k]);
                    }
                }
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

fn beta_s_grid() -> Outcome {
    let t = Instant::now();
    let tangency = beta_mixing(3, 1e-12)?;
    let bc = beta_critical(3)?;
    let steps = 1000;
    // Coarse scan on a coarse grid, then a 1e-3 scan on the full grid
    // inside the first violating coarse interval.
    let coarse: Vec<f64> = (0..=200).map(|i| 2.0 + 0.01 * i as f64).collect();
    let first_bad = coarse
        .iter()
        .position(|&b| worst_drift(b, steps) >= 0.0)
        .ok_or_else(|| bipotts::Error::NoConvergence {
            message: "no violation found up to beta = 4".into(),
            trace: vec![],
        })?;
    let lo = coarse[first_bad.saturating_sub(1)];
    let fine = (0..=10)
        .map(|i| lo + 1e-3 * i as f64)
        .find(|&b| worst_drift(b, steps) >= 0.0)
        .unwrap_or(coarse[first_bad]);
    // The grid threshold lies in (fine - 1e-3, fine].
    let grid_estimate = fine - 0.5e-3;
    let diff = (grid_estimate - tangency).abs();
    let secs = t.elapsed().as_secs_f64();
    let ok = diff <= 2e-3 && tangency < bc && secs < 300.0;
    Ok((
        ok,
        format!(
            "tangency {tangency:.10}, grid {grid_estimate:.4} (first violation at {fine:.3}), |diff| = {diff:.2e} \
             (limit 2e-3), beta_c = {bc:.10}; {secs:.1} s"
        ),
    ))
}

fn contraction() -> Outcome {
    let beta = 0.95 * beta_mixing(3, 1e-12)?;
    let samples = sample_contraction_ratios(beta, 3, 100, 0.05, SEED)?;
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let lip = lipschitz_ratio_near_rho(beta, 3, 1e-3, 1000, SEED)?;
    let survey = one_step_slack_survey(3, &[20, 50], &[0.5, 1.5], 2500, SEED)?;
    let ok = samples.len() == 100
        && max_ratio < 1.0
        && lip < 1.0
        && survey.pairs == 10_000
        && survey.exact_form_excess <= 1e-12
        && survey.c_star <= 0.05;
    Ok((
        ok,
        format!(
            "max contraction ratio {max_ratio:.4} over {} starts; Lipschitz ratio {lip:.4}; one-step bound on {} \
             pairs: exact form off by {:.1e}, smallest slack constant c* = {:.4}",
            samples.len(),
            survey.pairs,
            survey.exact_form_excess,
            survey.c_star
        ),
    ))
}

fn scaling() -> bipotts::Result<(Outcome, ScalingFit)> {
    let t = Instant::now();
    let beta = 0.9 * beta_mixing(3, 1e-12)?;
    let fit = coupling_time_scaling(3, beta, &[64, 128, 256, 512], 200, SEED)?;
    let secs = t.elapsed().as_secs_f64();
    let timeouts: usize = fit.timeouts.iter().sum();
    let ok = fit.r_squared >= 0.95 && timeouts == 0 && fit.replicas >= 200 && secs <= 1800.0;
    let means: Vec<String> = fit.mean_coupling_times.iter().map(|m| format!("{m:.0}")).collect();
    let detail = format!(
        "means {means:?} at n = {:?}; t ~ {:.3} n ln n, R^2 = {:.5} (limit 0.95); {timeouts} timeouts; {secs:.1} s",
        fit.n_values, fit.slope_a, fit.r_squared
    );
    Ok((Ok((ok, detail)), fit))
}

fn slow_mixing(fast: &ScalingFit) -> Outcome {
    let beta = beta_critical(3)? + 0.5;
    let cap = 10_000_000;
    let table = slow_mixing_probe(3, beta, &[64, 256], 100, SEED, cap)?;
    let (small, large) = (&table.rows[0], &table.rows[1]);
    let fast_256 = fast
        .n_values
        .iter()
        .position(|&n| n == 256)
        .map(|i| fast.mean_coupling_times[i])
        .unwrap_or(f64::NAN);
    // Censored replicas count at the cap, so the n = 256 mean is a lower
    // bound. The growth ratio is only a lower bound too if n = 64 is exact.
    let contrast = large.mean_escape / fast_256;
    let growth = large.mean_escape / small.mean_escape;
    let ok = contrast >= 20.0 && growth >= 5.0 && small.censored == 0;
    Ok((
        ok,
        format!(
            "escape n=64: {:.3e} ({} censored), n=256: {:.3e} ({} of {} censored at {cap:.0e}, lower bound); \
             fast coupling n=256: {fast_256:.0}; contrast {contrast:.0}x (limit 20), growth {growth:.1}x (limit 5)",
            small.mean_escape, small.censored, large.mean_escape, large.censored, table.replicas
        ),
    ))
}

fn exact_tv() -> Outcome {
    let params = ModelParams::new(3, 6, 1.0)?;
    let curve = exact_tv_curve(params, 300)?;
    let chain = ProjectedChain::new(params)?;
    let pi = chain.stationary();
    let push = magnetization_pushforward(&ExactEnsemble::new(params)?);
    let law_gap = (0..chain.n_states())
        .map(|s| (pi[s] - push.prob(&chain.pair(s))).abs())
        .fold(0.0, f64::max);
    let sandwich = coupling_sandwich(ModelParams::new(3, 4, 1.0)?, 100, 4000, SEED)?;
    let violations = sandwich.iter().filter(|p| p.t >= 1 && !p.holds(3.0)).count();
    let ok = curve.max_increase() <= 1e-12 && curve.t_mix_quarter.is_some() && law_gap <= 1e-12 && violations == 0;
    Ok((
        ok,
        format!(
            "max increase of d(t) {:.1e}; t_mix(1/4) = {:?}; |pi - pushforward| = {law_gap:.1e}; \
             sandwich violations (3 sigma) at (3,4), t = 1..100: {violations}",
            curve.max_increase(),
            curve.t_mix_quarter
        ),
    ))
}

fn side(counts: &[usize]) -> SpinConfig {
    let spins = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat(k as u8).take(c))
        .collect();
    SpinConfig::new(counts.len(), spins).unwrap()
}

fn riemann() -> Outcome {
    let beta = 0.9 * beta_mixing(3, 1e-12)?;
    let a = BipartiteConfig::new(side(&[160, 70, 70]), side(&[80, 150, 70]))?;
    let b = BipartiteConfig::new(side(&[100, 100, 100]), side(&[100, 100, 100]))?;
    let (ma, mb) = (a.magnetizations(), b.magnetizations());
    let d = continuous_aggregate_variation(&ma.left.to_prob(), &mb.left.to_prob(), beta, 8)?
        + continuous_aggregate_variation(&ma.right.to_prob(), &mb.right.to_prob(), beta, 8)?;
    let mut gaps = Vec::new();
    for eps in [0.02, 0.01, 0.005] {
        let path = build_monotone_path(&a, &b, eps)?;
        if !path.audit()?.passed() {
            return Ok((false, format!("path audit failed at eps = {eps}")));
        }
        let (s1, s2) = discrete_aggregate_variation(&path, beta);
        gaps.push(((s1 + s2) - d).abs() / d);
    }
    let ok = gaps[0] <= 0.02 && gaps[1] < gaps[0] && gaps[2] < gaps[1];
    Ok((ok, format!("relative gaps at eps = 0.02, 0.01, 0.005: {:.3e}, {:.3e}, {:.3e} (first limit 2e-2, must shrink)", gaps[0], gaps[1], gaps[2])))
}

fn report(name: &str, outcome: Outcome, elapsed: Duration) -> bool {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!(
        "acceptance [{}] {name}: {detail} ({:.1} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let outcome = f();
    report(name, outcome, t.elapsed())
}

fn main() {
    let mut results = vec![
        run("stationarity oracle", stationarity),
        run("kernel exactness", || suite(Suite::KernelExactness)),
        run("phase checkpoints", phase_checkpoints),
        run("rapid-mixing threshold vs simplex grid", beta_s_grid),
        run("duality diagnostic", || suite(Suite::Duality)),
        run("contraction", contraction),
    ];

    let mut fast = None;
    results.push(run("rapid-mixing scaling", || {
        let (outcome, fit) = scaling()?;
        fast = Some(fit);
        outcome
    }));
    results.push(run("slow-mixing contrast", || match &fast {
        Some(fit) => slow_mixing(fit),
        None => Err(bipotts::Error::Inconsistent("scaling run failed; no reference time".into())),
    }));

    results.push(run("exact total variation", exact_tv));
    results.push(run("Riemann convergence", riemann));

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
