use std::path::Path;

use anyhow::Context;
use bipotts::coupling::{run_coupling, CouplingState};
use bipotts::equilibrium::{beta_critical, beta_mixing, macrostates, PhasePoint};
use bipotts::exact::{exact_glauber_kernel, magnetization_pushforward, ExactEnsemble};
use bipotts::glauber::{run, ChainState, RngSpec};
use bipotts::ldp::{diagonal_landscape, free_energy};
use bipotts::mixing::{
    coupling_sandwich, coupling_time_scaling, exact_tv_curve, escape_radius, replica_stream, slow_mixing_probe,
};
use bipotts::paths::{contraction_ratio, lipschitz_ratio_near_rho, sample_contraction_ratios, ContractionSample};
use bipotts::verify::{run_suite, Suite, VerifyOptions};
use bipotts::{BipartiteConfig, ModelParams, ProbVector, SpinConfig};
use chrono::Utc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Resolver;
use crate::output::{sig, Csv, OutDir, EXACT_DIGITS, TRACE_DIGITS};
use crate::{Cli, Command, MixCommand, Outcome, UsageError};

const SOLVER_TOL: f64 = 1e-12;

pub fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    let name = match &cli.command {
        Command::Phase(_) => "phase",
        Command::Simulate(_) => "simulate",
        Command::Couple(_) => "couple",
        Command::Paths(_) => "paths",
        Command::Mix(MixCommand::Exact(_)) => "mix-exact",
        Command::Mix(MixCommand::Scaling(_)) => "mix-scaling",
        Command::Mix(MixCommand::Slow(_)) => "mix-slow",
        Command::Verify(_) => "verify",
    };
    let started = Utc::now();
    let mut cfg = Resolver::new(cli.config.as_deref(), name)?;
    // Resolve everything before touching the output directory so usage
    // errors leave no files behind.
    let plan = match &cli.command {
        Command::Phase(a) => Plan::Phase(PhasePlan::resolve(a, &mut cfg)?),
        Command::Simulate(a) => Plan::Simulate(SimulatePlan::resolve(a, &mut cfg)?),
        Command::Couple(a) => Plan::Couple(CouplePlan::resolve(a, &mut cfg)?),
        Command::Paths(a) => Plan::Paths(PathsPlan::resolve(a, &mut cfg)?),
        Command::Mix(MixCommand::Exact(a)) => Plan::MixExact(MixExactPlan::resolve(a, &mut cfg)?),
        Command::Mix(MixCommand::Scaling(a)) => Plan::MixScaling(MixScalingPlan::resolve(a, &mut cfg)?),
        Command::Mix(MixCommand::Slow(a)) => Plan::MixSlow(MixSlowPlan::resolve(a, &mut cfg)?),
        Command::Verify(a) => Plan::Verify(VerifyPlan::resolve(a, &mut cfg)?),
    };
    let mut out = OutDir::create(&cli.out_dir)?;
    let (outcome, seed) = match plan {
        Plan::Phase(p) => (p.run(&mut out)?, None),
        Plan::Simulate(p) => (p.run(&mut out)?, Some(p.seed)),
        Plan::Couple(p) => (p.run(&mut out)?, Some(p.seed)),
        Plan::Paths(p) => (p.run(&mut out)?, Some(p.seed)),
        Plan::MixExact(p) => (p.run(&mut out)?, Some(p.seed)),
        Plan::MixScaling(p) => (p.run(&mut out)?, Some(p.seed)),
        Plan::MixSlow(p) => (p.run(&mut out)?, Some(p.seed)),
        Plan::Verify(p) => (p.run(&mut out)?, Some(p.seed)),
    };
    out.finish(name, cfg.into_params(), seed, started)?;
    Ok(outcome)
}

enum Plan {
    Phase(PhasePlan),
    Simulate(SimulatePlan),
    Couple(CouplePlan),
    Paths(PathsPlan),
    MixExact(MixExactPlan),
    MixScaling(MixScalingPlan),
    MixSlow(MixSlowPlan),
    Verify(VerifyPlan),
}

fn params(q: usize, n: usize, beta: f64) -> anyhow::Result<ModelParams> {
    Ok(ModelParams::new(q, n, beta)?)
}

// ---------------------------------------------------------------- phase

struct PhasePlan {
    q: usize,
    beta: f64,
    tol: f64,
    sweep: Option<(f64, f64, usize)>,
    landscape: Option<usize>,
}

#[derive(Serialize)]
struct PhaseReport {
    q: usize,
    beta_c: f64,
    beta_s: f64,
    beta: f64,
    s: f64,
    regime: bipotts::equilibrium::Regime,
    macrostates: Vec<Vec<f64>>,
    alpha_uniform: f64,
    alpha_ordered: f64,
    free_energy: f64,
}

impl PhasePlan {
    fn resolve(a: &crate::PhaseArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let beta_c = beta_critical(q)?;
        let beta = cfg.get("beta", a.beta, beta_c)?;
        let tol = cfg.get("tol", a.tol, SOLVER_TOL)?;
        let sweep = if cfg.get("sweep", a.sweep.then_some(true), false)? {
            let lo = cfg.get("beta_min", a.beta_min, 0.0)?;
            let hi = cfg.get("beta_max", a.beta_max, 2.0 * beta_c)?;
            let points = cfg.get("points", a.points, 201)?;
            if !(lo >= 0.0 && hi > lo) || points < 2 {
                return Err(UsageError(format!("sweep needs 0 <= beta_min < beta_max and points >= 2")).into());
            }
            Some((lo, hi, points))
        } else {
            None
        };
        let landscape = if cfg.get("landscape", a.landscape.then_some(true), false)? {
            if q != 3 {
                return Err(UsageError("--landscape is only available for q = 3".into()).into());
            }
            Some(cfg.get("grid_steps", a.grid_steps, 60)?)
        } else {
            None
        };
        Ok(Self {
            q,
            beta,
            tol,
            sweep,
            landscape,
        })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let q = self.q;
        let point = macrostates(self.beta, q, self.tol)?;
        let report = PhaseReport {
            q,
            beta_c: beta_critical(q)?,
            beta_s: beta_mixing(q, self.tol)?,
            beta: self.beta,
            s: point.s,
            regime: point.regime,
            macrostates: point.macrostates.iter().map(|m| m.weights().to_vec()).collect(),
            alpha_uniform: point.alpha_uniform,
            alpha_ordered: point.alpha_ordered,
            free_energy: free_energy(self.beta, q)?,
        };
        out.write_json("phase.json", &report)?;
        println!("{}", serde_json::to_string_pretty(&report)?);

        if let Some((lo, hi, points)) = self.sweep {
            let betas: Vec<f64> = (0..points)
                .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .collect();
            let rows: Vec<PhasePoint> = betas
                .par_iter()
                .map(|&b| macrostates(b, q, self.tol))
                .collect::<bipotts::Result<_>>()?;
            let mut csv = Csv::new(&["beta", "s", "alpha_rho", "alpha_nu", "regime"]);
            for p in &rows {
                let regime = serde_json::to_value(p.regime)?;
                csv.row(&[
                    sig(p.beta, EXACT_DIGITS),
                    sig(p.s, EXACT_DIGITS),
                    sig(p.alpha_uniform, EXACT_DIGITS),
                    sig(p.alpha_ordered, EXACT_DIGITS),
                    regime.as_str().unwrap_or_default().to_string(),
                ]);
            }
            out.write("phase_sweep.csv", &csv.into_string())?;
        }

        if let Some(steps) = self.landscape {
            let samples = diagonal_landscape(self.beta, steps)?;
            let mut header: Vec<String> = (1..=q).map(|k| format!("gamma_{k}")).collect();
            header.extend(["alpha".into(), "rate".into()]);
            let mut csv = Csv::new(&header);
            for s in samples {
                let mut row: Vec<String> = s.gamma.weights().iter().map(|&x| sig(x, EXACT_DIGITS)).collect();
                row.push(sig(s.alpha, EXACT_DIGITS));
                row.push(sig(s.rate, EXACT_DIGITS));
                csv.row(&row);
            }
            out.write("landscape.csv", &csv.into_string())?;
        }
        Ok(Outcome::Ok)
    }
}

// ------------------------------------------------------------- initial states

#[derive(Deserialize)]
struct ConfigFile {
    left: Vec<u8>,
    right: Vec<u8>,
}

#[derive(Clone, Debug)]
enum Init {
    Uniform,
    Ordered(usize),
    Custom(BipartiteConfig),
}

impl Init {
    fn parse(arg: &str, q: usize, n: usize) -> anyhow::Result<Self> {
        if arg == "uniform" {
            return Ok(Init::Uniform);
        }
        if let Some(k) = arg.strip_prefix("ordered:") {
            let k: usize = k
                .parse()
                .map_err(|_| UsageError(format!("bad init {arg:?}: expected ordered:<k>")))?;
            if k >= q {
                return Err(UsageError(format!("init {arg:?}: spin {k} out of range for q = {q}")).into());
            }
            return Ok(Init::Ordered(k));
        }
        let path = Path::new(arg);
        if !path.exists() {
            return Err(UsageError(format!(
                "bad init {arg:?}: expected uniform, ordered:<k> or a JSON configuration file"
            ))
            .into());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        let file: ConfigFile =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("configuration file {arg}: {e}")))?;
        if file.left.len() != n || file.right.len() != n {
            return Err(UsageError(format!("configuration file {arg}: expected {n} spins per side")).into());
        }
        let cfg = BipartiteConfig::new(SpinConfig::new(q, file.left)?, SpinConfig::new(q, file.right)?)?;
        Ok(Init::Custom(cfg))
    }

    fn config(&self, params: &ModelParams, rng: &mut impl rand::Rng) -> anyhow::Result<BipartiteConfig> {
        Ok(match self {
            Init::Uniform => ChainState::uniform_random(*params, rng)?.config().clone(),
            Init::Ordered(k) => BipartiteConfig::ordered(params.q(), params.n(), *k)?,
            Init::Custom(c) => c.clone(),
        })
    }
}

// ------------------------------------------------------------- simulate

struct SimulatePlan {
    params: ModelParams,
    steps: u64,
    record_every: u64,
    seed: u64,
    init: Init,
}

impl SimulatePlan {
    fn resolve(a: &crate::SimulateArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let n = cfg.require("n", a.n)?;
        let beta = cfg.require("beta", a.beta)?;
        let params = params(q, n, beta)?;
        let steps = cfg.get("steps", a.steps, 10_000)?;
        let record_every = cfg.get("record_every", a.record_every, 100)?;
        if record_every == 0 {
            return Err(UsageError("--record-every must be >= 1".into()).into());
        }
        let seed = cfg.get("seed", a.seed, 0)?;
        let init_arg: String = cfg.get("init", a.init.clone(), "uniform".into())?;
        let init = Init::parse(&init_arg, q, n)?;
        Ok(Self {
            params,
            steps,
            record_every,
            seed,
            init,
        })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let q = self.params.q();
        let mut rng = RngSpec::new(self.seed, 0).rng();
        let config = self.init.config(&self.params, &mut rng)?;
        let mut state = ChainState::new(self.params, config)?;
        let traj = run(&mut state, self.steps, self.record_every, &mut rng)?;
        let mut header: Vec<String> = (1..=q).map(|k| format!("left_{k}")).collect();
        header.extend((1..=q).map(|k| format!("right_{k}")));
        header.insert(0, "step".into());
        let mut csv = Csv::new(&header);
        for p in &traj {
            let mut row = vec![p.step.to_string()];
            for side in [&p.mags.left, &p.mags.right] {
                row.extend(side.proportions().iter().map(|&x| sig(x, TRACE_DIGITS)));
            }
            csv.row(&row);
        }
        out.write("trajectory.csv", &csv.into_string())?;
        Ok(Outcome::Ok)
    }
}

// ------------------------------------------------------------- couple

struct CouplePlan {
    params: ModelParams,
    replicas: usize,
    t_max: u64,
    seed: u64,
    init_x: Init,
    init_y: Init,
    trace_stride: u64,
}

#[derive(Serialize)]
struct ReplicaResult {
    replica: usize,
    coupling_time: Option<u64>,
    timed_out: bool,
}

impl CouplePlan {
    fn resolve(a: &crate::CoupleArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let n = cfg.require("n", a.n)?;
        let beta = cfg.require("beta", a.beta)?;
        let params = params(q, n, beta)?;
        let replicas = cfg.get("replicas", a.replicas, 100)?;
        if replicas == 0 {
            return Err(UsageError("--replicas must be >= 1".into()).into());
        }
        let t_max = cfg.get("t_max", a.t_max, 1_000_000)?;
        let seed = cfg.get("seed", a.seed, 0)?;
        let x: String = cfg.get("init_x", a.init_x.clone(), "ordered:0".into())?;
        let y: String = cfg.get("init_y", a.init_y.clone(), "ordered:1".into())?;
        let trace_stride = cfg.get("trace_stride", a.trace_stride, 0)?;
        Ok(Self {
            params,
            replicas,
            t_max,
            seed,
            init_x: Init::parse(&x, q, n)?,
            init_y: Init::parse(&y, q, n)?,
            trace_stride,
        })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let n = self.params.n();
        let runs = (0..self.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngSpec::new(self.seed, replica_stream(n, r)).rng();
                let x = self.init_x.config(&self.params, &mut rng)?;
                let y = self.init_y.config(&self.params, &mut rng)?;
                let mut cs = CouplingState::new(self.params, x, y)?;
                Ok(run_coupling(&mut cs, self.t_max, self.trace_stride, &mut rng))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let results: Vec<ReplicaResult> = runs
            .iter()
            .enumerate()
            .map(|(replica, r)| ReplicaResult {
                replica,
                coupling_time: r.coupling_time,
                timed_out: r.timed_out(),
            })
            .collect();
        out.write_json("couple.json", &results)?;
        if self.trace_stride > 0 {
            let mut csv = Csv::new(&["replica", "step", "distance"]);
            for (replica, r) in runs.iter().enumerate() {
                for p in &r.trace {
                    csv.row(&[replica.to_string(), p.step.to_string(), p.distance.to_string()]);
                }
            }
            out.write("couple_traces.csv", &csv.into_string())?;
        }
        let timeouts = results.iter().filter(|r| r.timed_out).count();
        println!("{} replicas, {} timed out", results.len(), timeouts);
        Ok(Outcome::Ok)
    }
}

// ------------------------------------------------------------- paths

struct PathsPlan {
    q: usize,
    beta: f64,
    samples: usize,
    grid: Option<usize>,
    end_radius: f64,
    seed: u64,
}

/// Lipschitz probe radius and sample count for the summary.
const LIPSCHITZ_RADIUS: f64 = 1e-3;
const LIPSCHITZ_SAMPLES: usize = 1000;

impl PathsPlan {
    fn resolve(a: &crate::PathsArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let beta = cfg.require("beta", a.beta)?;
        params(q, 1, beta)?;
        let samples = cfg.get("samples", a.samples, 100)?;
        let grid = cfg.optional("grid", a.grid)?;
        if grid.is_some() && q != 3 {
            return Err(UsageError("--grid is only available for q = 3".into()).into());
        }
        if grid == Some(0) {
            return Err(UsageError("--grid needs at least one subdivision".into()).into());
        }
        let end_radius = cfg.get("end_radius", a.end_radius, 0.05)?;
        let seed = cfg.get("seed", a.seed, 0)?;
        Ok(Self {
            q,
            beta,
            samples,
            grid,
            end_radius,
            seed,
        })
    }

    fn grid_samples(&self, steps: usize) -> anyhow::Result<Vec<ContractionSample>> {
        let rho = ProbVector::uniform(3);
        let s = steps as f64;
        let mut starts = Vec::new();
        for i in 0..=steps {
            for j in 0..=steps - i {
                let x = ProbVector::new(vec![i as f64 / s, j as f64 / s, (steps - i - j) as f64 / s])?;
                if x.l1_distance(&rho) > 0.0 {
                    starts.push(x);
                }
            }
        }
        starts
            .into_par_iter()
            .map(|x| {
                let ratio = contraction_ratio((&x, &x), (&rho, &rho), self.beta)?;
                Ok(ContractionSample {
                    start: (x.clone(), x),
                    end: (rho.clone(), rho.clone()),
                    ratio,
                })
            })
            .collect()
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let q = self.q;
        let samples = match self.grid {
            Some(steps) => self.grid_samples(steps)?,
            None => sample_contraction_ratios(self.beta, q, self.samples, self.end_radius, self.seed)?,
        };
        let mut header = Vec::new();
        for prefix in ["start_x", "start_y", "end_x", "end_y"] {
            header.extend((1..=q).map(|k| format!("{prefix}_{k}")));
        }
        header.push("ratio".into());
        let mut csv = Csv::new(&header);
        for s in &samples {
            let mut row = Vec::with_capacity(4 * q + 1);
            for v in [&s.start.0, &s.start.1, &s.end.0, &s.end.1] {
                row.extend(v.weights().iter().map(|&x| sig(x, EXACT_DIGITS)));
            }
            row.push(sig(s.ratio, EXACT_DIGITS));
            csv.row(&row);
        }
        out.write("paths.csv", &csv.into_string())?;
        let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
        let lipschitz = lipschitz_ratio_near_rho(self.beta, q, LIPSCHITZ_RADIUS, LIPSCHITZ_SAMPLES, self.seed)?;
        let summary = json!({
            "q": q,
            "beta": self.beta,
            "samples": samples.len(),
            "max_ratio": max_ratio,
            "lipschitz_radius": LIPSCHITZ_RADIUS,
            "lipschitz_ratio": lipschitz,
            "lipschitz_limit": self.beta / q as f64,
        });
        out.write_json("paths.json", &summary)?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
        Ok(Outcome::Ok)
    }
}

// ------------------------------------------------------------- mix

struct MixExactPlan {
    params: ModelParams,
    t_max: u64,
    sandwich_replicas: usize,
    seed: u64,
}

impl MixExactPlan {
    fn resolve(a: &crate::MixExactArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let n = cfg.require("n", a.n)?;
        let beta = cfg.require("beta", a.beta)?;
        Ok(Self {
            params: params(q, n, beta)?,
            t_max: cfg.get("t_max", a.t_max, 200)?,
            sandwich_replicas: cfg.get("sandwich_replicas", a.sandwich_replicas, 0)?,
            seed: cfg.get("seed", a.seed, 0)?,
        })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let curve = exact_tv_curve(self.params, self.t_max)?;
        let mut csv = Csv::new(&["t", "d_t", "dbar_t"]);
        for ((t, d), db) in curve.times.iter().zip(&curve.distances).zip(&curve.dbar) {
            csv.row(&[t.to_string(), sig(*d, EXACT_DIGITS), sig(*db, EXACT_DIGITS)]);
        }
        out.write("mix_exact.csv", &csv.into_string())?;
        let summary = json!({
            "chain": "projected magnetization chain",
            "q": self.params.q(),
            "n": self.params.n(),
            "beta": self.params.beta(),
            "t_mix_quarter": curve.t_mix_quarter,
            "max_increase": curve.max_increase(),
            "starts": curve.starts,
            "dbar_starts": curve.dbar_starts,
        });
        out.write_json("mix_exact.json", &summary)?;
        println!("{}", serde_json::to_string_pretty(&summary)?);

        if self.sandwich_replicas > 0 {
            let points = coupling_sandwich(self.params, self.t_max, self.sandwich_replicas, self.seed)?;
            let mut csv = Csv::new(&["t", "projected_tv", "coupling_bound", "coupling_stderr"]);
            for p in &points {
                csv.row(&[
                    p.t.to_string(),
                    sig(p.projected_tv, EXACT_DIGITS),
                    sig(p.coupling_bound, EXACT_DIGITS),
                    sig(p.coupling_stderr, EXACT_DIGITS),
                ]);
            }
            out.write("mix_sandwich.csv", &csv.into_string())?;
        }
        Ok(Outcome::Ok)
    }
}

fn resolve_beta_frac(
    cfg: &mut Resolver,
    beta: Option<f64>,
    frac: Option<f64>,
    q: usize,
) -> anyhow::Result<f64> {
    let beta = cfg.optional("beta", beta)?;
    let frac = cfg.optional("beta_frac", frac)?;
    match (beta, frac) {
        (Some(b), _) => Ok(b),
        (None, Some(f)) => {
            let b = f * beta_mixing(q, SOLVER_TOL)?;
            cfg.note("beta", &b);
            Ok(b)
        }
        (None, None) => Err(UsageError("missing required --beta (or --beta-frac)".into()).into()),
    }
}

struct MixScalingPlan {
    q: usize,
    beta: f64,
    n_list: Vec<usize>,
    replicas: usize,
    seed: u64,
}

impl MixScalingPlan {
    fn resolve(a: &crate::MixScalingArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let beta = resolve_beta_frac(cfg, a.beta, a.beta_frac, q)?;
        let n_list: Vec<usize> = cfg.get("n_list", a.n_list.clone(), vec![32, 64, 128, 256])?;
        if n_list.is_empty() {
            return Err(UsageError("--n-list is empty".into()).into());
        }
        for &n in &n_list {
            params(q, n, beta)?;
        }
        Ok(Self {
            q,
            beta,
            n_list,
            replicas: cfg.get("replicas", a.replicas, 200)?,
            seed: cfg.get("seed", a.seed, 0)?,
        })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let fit = coupling_time_scaling(self.q, self.beta, &self.n_list, self.replicas, self.seed)?;
        let mut csv = Csv::new(&["n", "mean_tc", "stderr", "timeouts"]);
        for i in 0..fit.n_values.len() {
            csv.row(&[
                fit.n_values[i].to_string(),
                sig(fit.mean_coupling_times[i], EXACT_DIGITS),
                sig(fit.stderrs[i], EXACT_DIGITS),
                fit.timeouts[i].to_string(),
            ]);
        }
        out.write("mix_scaling.csv", &csv.into_string())?;
        let summary = json!({
            "q": fit.q,
            "beta": fit.beta,
            "replicas": fit.replicas,
            "slope": fit.slope_a,
            "r2": fit.r_squared,
            "warnings": fit.warnings,
        });
        out.write_json("mix_scaling.json", &summary)?;
        for w in &fit.warnings {
            eprintln!("warning: {w}");
        }
        println!("{}", serde_json::to_string_pretty(&summary)?);
        Ok(Outcome::Ok)
    }
}

struct MixSlowPlan {
    q: usize,
    beta: f64,
    n_list: Vec<usize>,
    replicas: usize,
    cap: u64,
    seed: u64,
}

impl MixSlowPlan {
    fn resolve(a: &crate::MixSlowArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let q = cfg.require("q", a.q)?;
        let beta = match (cfg.optional("beta", a.beta)?, cfg.optional("beta_offset", a.beta_offset)?) {
            (Some(b), _) => b,
            (None, Some(off)) => {
                let b = beta_critical(q)? + off;
                cfg.note("beta", &b);
                b
            }
            (None, None) => return Err(UsageError("missing required --beta (or --beta-offset)".into()).into()),
        };
        let n_list: Vec<usize> = cfg.get("n_list", a.n_list.clone(), vec![64, 128, 256])?;
        if n_list.is_empty() {
            return Err(UsageError("--n-list is empty".into()).into());
        }
        for &n in &n_list {
            params(q, n, beta)?;
        }
        let replicas = cfg.get("replicas", a.replicas, 100)?;
        if replicas == 0 {
            return Err(UsageError("--replicas must be >= 1".into()).into());
        }
        Ok(Self {
            q,
            beta,
            n_list,
            replicas,
            cap: cfg.get("cap", a.cap, 10_000_000)?,
            seed: cfg.get("seed", a.seed, 0)?,
        })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let table = slow_mixing_probe(self.q, self.beta, &self.n_list, self.replicas, self.seed, self.cap)?;
        let mut csv = Csv::new(&["n", "mean_escape", "stderr", "censored"]);
        for r in &table.rows {
            csv.row(&[
                r.n.to_string(),
                sig(r.mean_escape, EXACT_DIGITS),
                sig(r.stderr, EXACT_DIGITS),
                r.censored.to_string(),
            ]);
        }
        out.write("mix_slow.csv", &csv.into_string())?;
        let summary = json!({
            "q": table.q,
            "beta": table.beta,
            "radius": escape_radius(self.q, self.beta)?,
            "replicas": table.replicas,
            "cap": self.cap,
            "censored_means_are_lower_bounds": true,
        });
        out.write_json("mix_slow.json", &summary)?;
        println!("{}", serde_json::to_string_pretty(&table)?);
        Ok(Outcome::Ok)
    }
}

// ------------------------------------------------------------- verify

struct VerifyPlan {
    suite: Suite,
    seed: u64,
    dump: Option<ModelParams>,
}

impl VerifyPlan {
    fn resolve(a: &crate::VerifyArgs, cfg: &mut Resolver) -> anyhow::Result<Self> {
        let name: String = cfg.get("suite", a.suite.clone(), "all".into())?;
        let suite = Suite::parse(&name)?;
        let seed = cfg.get("seed", a.seed, 0)?;
        let dump = if cfg.get("dump", a.dump.then_some(true), false)? {
            let q = cfg.require("q", a.q)?;
            let n = cfg.require("n", a.n)?;
            let beta = cfg.require("beta", a.beta)?;
            Some(params(q, n, beta)?)
        } else {
            None
        };
        Ok(Self { suite, seed, dump })
    }

    fn run(&self, out: &mut OutDir) -> anyhow::Result<Outcome> {
        let opts = VerifyOptions {
            seed: self.seed,
            ..VerifyOptions::default()
        };
        let report = run_suite(self.suite, &opts)?;
        out.write_json("verify.json", &report)?;
        for c in &report.checks {
            println!(
                "{} {}/{}: measured {} (tolerance {})",
                if c.passed { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                sig(c.measured, EXACT_DIGITS),
                sig(c.tolerance, EXACT_DIGITS),
            );
        }
        if let Some(params) = self.dump {
            let kernel = exact_glauber_kernel(&params)?;
            let mut csv = Csv::new(&["from", "to", "probability"]);
            for i in 0..kernel.n_states() {
                for (j, p) in kernel.row(i) {
                    csv.row(&[i.to_string(), j.to_string(), sig(p, EXACT_DIGITS)]);
                }
            }
            out.write("kernel.csv", &csv.into_string())?;
            let push = magnetization_pushforward(&ExactEnsemble::new(params)?);
            let q = params.q();
            let mut header: Vec<String> = (1..=q).map(|k| format!("left_{k}")).collect();
            header.extend((1..=q).map(|k| format!("right_{k}")));
            header.push("probability".into());
            let mut csv = Csv::new(&header);
            for (pair, p) in &push.table {
                let mut row: Vec<String> = pair.left.counts().iter().map(|c| c.to_string()).collect();
                row.extend(pair.right.counts().iter().map(|c| c.to_string()));
                row.push(sig(*p, EXACT_DIGITS));
                csv.row(&row);
            }
            out.write("pushforward.csv", &csv.into_string())?;
        }
        println!("suite {}: {}", report.suite, if report.passed { "passed" } else { "FAILED" });
        Ok(if report.passed {
            Outcome::Ok
        } else {
            Outcome::VerificationFailed
        })
    }
}
