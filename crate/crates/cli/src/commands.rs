//! Subcommand implementations. Each resolves its settings, computes its
//! data, and returns the artifacts to write.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use mgame_core::engine::{LambdaSource, Mode, Simulation, StrategyConfig};
use mgame_core::kpr::kpr_run;
use mgame_core::payoff::payoff_curve;
use mgame_core::solver::{LambdaTable, DEFAULT_TOLERANCE};
use mgame_core::stats::{self, mean_and_stderr, StatsSummary};
use mgame_core::stream_rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{parse_epsilons, ConfigFile, Resolver};
use crate::error::CliError;
use crate::output::{num, Artifact};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the cheat-proof λ(Δ) for Δ = 1..=K.
    SolveLambda(SolveLambdaArgs),
    /// Next-day payoffs of minority and majority agents at the solved λ(Δ).
    PayoffTable(PayoffArgs),
    /// Simulate one population and emit its trajectory.
    Simulate(SimulateArgs),
    /// Inefficiency η against ε, averaged over seeds.
    Sweep(SweepArgs),
    /// Kolkata Paise Restaurant convergence times.
    Kpr(KprArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveLambda(_) => "solve-lambda",
            Command::PayoffTable(_) => "payoff-table",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Kpr(_) => "kpr",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveLambdaArgs {
    #[arg(long)]
    pub delta_max: Option<u64>,
    /// Residual tolerance of the root finder.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PayoffArgs {
    #[arg(long)]
    pub delta_max: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Strategy,
    Baseline,
}

/// Population settings shared by `simulate` and `sweep`.
#[derive(Debug, Args)]
pub struct PopulationArgs {
    /// Number of agents (odd).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Days the marginal state is held before a reset.
    #[arg(long)]
    pub wait_t: Option<u32>,
    /// Prefactor c of the reset probability c·M^(ε−1).
    #[arg(long)]
    pub reset_prefactor: Option<f64>,
    /// Use exact finite-M switch probabilities instead of the Poisson limit.
    #[arg(long)]
    pub finite_m: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub pop: PopulationArgs,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Record per-agent choices and emit C(τ).
    #[arg(long)]
    pub record_choices: bool,
    /// Emit the Δ histogram and ⟨S(t)S(t+τ)⟩.
    #[arg(long)]
    pub stats: bool,
    /// Largest lag for autocorrelations.
    #[arg(long)]
    pub tau_max: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub pop: PopulationArgs,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub epsilons: Option<String>,
    /// Runs per ε.
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct KprArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Resolved settings plus the work to run.
pub struct Plan {
    pub config: BTreeMap<String, Value>,
    pub out_dir: PathBuf,
    job: Job,
}

enum Job {
    SolveLambda { delta_max: u64, tolerance: f64 },
    PayoffTable { delta_max: u64 },
    Simulate { config: StrategyConfig, steps: usize, record_choices: bool, stats: bool, tau_max: usize, burn_in: usize },
    Sweep { base: StrategyConfig, epsilons: Vec<f64>, seeds: u64, steps: usize },
    Kpr { n: usize, seeds: u64, max_steps: u64, seed: u64 },
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn population(
    r: &mut Resolver<'_>,
    pop: &PopulationArgs,
    epsilon: f64,
    mode: Mode,
) -> Result<(StrategyConfig, usize), CliError> {
    let n: usize = r.get("n", pop.n, 2001)?;
    let steps: usize = r.get("steps", pop.steps, 10_000)?;
    let seed: u64 = r.get("seed", pop.seed, 1)?;
    let wait_t: u32 = r.get("wait_t", pop.wait_t, 0)?;
    let reset_prefactor: f64 = r.get("reset_prefactor", pop.reset_prefactor, 0.5)?;
    let finite_m = r.switch("finite_m", pop.finite_m)?;
    if n.is_multiple_of(2) {
        return Err(usage(format!("n must be odd, got {n}")));
    }
    if steps == 0 {
        return Err(usage("steps must be at least 1"));
    }
    if reset_prefactor.is_nan() || reset_prefactor <= 0.0 {
        return Err(usage(format!("reset_prefactor must be positive, got {reset_prefactor}")));
    }
    let mut config = StrategyConfig::new(n, epsilon, seed).with_wait(wait_t).with_mode(mode);
    config.reset_prefactor = reset_prefactor;
    config.lambda_source = if finite_m { LambdaSource::FiniteM } else { LambdaSource::PoissonLimit };
    config.validate().map_err(|e| usage(format!("{e}")))?;
    Ok((config, steps))
}

fn check_epsilon(epsilon: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(epsilon)
    } else {
        Err(usage(format!("epsilon must lie in [0, 1], got {epsilon}")))
    }
}

/// Resolves every setting of `command`, flags over file over defaults.
pub fn plan(command: &Command, file: &ConfigFile, out_dir: Option<PathBuf>) -> Result<Plan, CliError> {
    let mut r = Resolver::new(file);
    let job = match command {
        Command::SolveLambda(a) => {
            let delta_max = r.get("delta_max", a.delta_max, 50)?;
            let tolerance = r.get("tolerance", a.tolerance, DEFAULT_TOLERANCE)?;
            if delta_max == 0 {
                return Err(usage("delta_max must be at least 1"));
            }
            Job::SolveLambda { delta_max, tolerance }
        }
        Command::PayoffTable(a) => {
            let delta_max = r.get("delta_max", a.delta_max, 50)?;
            if delta_max == 0 {
                return Err(usage("delta_max must be at least 1"));
            }
            Job::PayoffTable { delta_max }
        }
        Command::Simulate(a) => {
            let epsilon = check_epsilon(r.get("epsilon", a.epsilon, 0.5)?)?;
            let mode = match r.get("mode", a.mode, ModeArg::Strategy)? {
                ModeArg::Strategy => Mode::Strategy,
                ModeArg::Baseline => Mode::Baseline,
            };
            let (config, steps) = population(&mut r, &a.pop, epsilon, mode)?;
            let record_choices = r.switch("record_choices", a.record_choices)?;
            let stats = r.switch("stats", a.stats)?;
            let tau_max = r.get("tau_max", a.tau_max, 100)?;
            let burn_in = r.get("burn_in", a.burn_in, 0)?;
            if burn_in >= steps {
                return Err(usage(format!("burn_in {burn_in} must be below steps {steps}")));
            }
            Job::Simulate { config, steps, record_choices, stats, tau_max, burn_in }
        }
        Command::Sweep(a) => {
            let list: String = r.get("epsilons", a.epsilons.clone(), "0.1:0.9:0.1".to_string())?;
            let epsilons = parse_epsilons(&list)?;
            let seeds = r.get("seeds", a.seeds, 20)?;
            if seeds == 0 {
                return Err(usage("seeds must be at least 1"));
            }
            let (base, steps) = population(&mut r, &a.pop, epsilons[0], Mode::Strategy)?;
            for &e in &epsilons {
                StrategyConfig { epsilon: e, ..base.clone() }.validate().map_err(|e| usage(e.to_string()))?;
            }
            Job::Sweep { base, epsilons, seeds, steps }
        }
        Command::Kpr(a) => {
            let n = r.get("n", a.n, 64)?;
            let seeds = r.get("seeds", a.seeds, 200)?;
            let max_steps = r.get("max_steps", a.max_steps, 10_000)?;
            let seed = r.get("seed", a.seed, 1)?;
            if n == 0 || seeds == 0 {
                return Err(usage("n and seeds must be at least 1"));
            }
            Job::Kpr { n, seeds, max_steps, seed }
        }
    };
    let default_dir = std::env::var("MGAME_OUT_DIR").unwrap_or_else(|_| "mgame-out".into());
    let out_dir: String = r.get("out_dir", out_dir.map(|p| p.display().to_string()), default_dir)?;
    Ok(Plan { config: r.finish()?, out_dir: PathBuf::from(out_dir), job })
}

impl Plan {
    pub fn execute(&self) -> Result<Vec<Artifact>, CliError> {
        match &self.job {
            Job::SolveLambda { delta_max, tolerance } => solve_lambda(*delta_max, *tolerance),
            Job::PayoffTable { delta_max } => payoff_table(*delta_max),
            Job::Simulate { config, steps, record_choices, stats, tau_max, burn_in } => {
                simulate(config, *steps, *record_choices, *stats, *tau_max, *burn_in)
            }
            Job::Sweep { base, epsilons, seeds, steps } => sweep(base, epsilons, *seeds, *steps),
            Job::Kpr { n, seeds, max_steps, seed } => kpr(*n, *seeds, *max_steps, *seed),
        }
    }
}

fn solve_lambda(delta_max: u64, tolerance: f64) -> Result<Vec<Artifact>, CliError> {
    let table = LambdaTable::build(delta_max, tolerance).map_err(CliError::core("solver"))?;
    let rows = table.entries().iter().map(|(d, lam)| format!("{d},{lam:.10}")).collect();
    Ok(vec![Artifact::csv("lambda_table.csv", "delta,lambda", rows)])
}

fn payoff_table(delta_max: u64) -> Result<Vec<Artifact>, CliError> {
    let rows = payoff_curve(delta_max)
        .map_err(CliError::core("payoff"))?
        .iter()
        .map(|r| {
            format!(
                "{},{:.10},{:.10},{:.10},{:.10},{:.10}",
                r.delta, r.lambda, r.alice_stay, r.alice_switch, r.bob_stay, r.bob_switch
            )
        })
        .collect();
    Ok(vec![Artifact::csv("payoff_table.csv", "delta,lambda,alice_stay,alice_switch,bob_stay,bob_switch", rows)])
}

fn simulate(
    config: &StrategyConfig,
    steps: usize,
    record_choices: bool,
    want_stats: bool,
    tau_max: usize,
    burn_in: usize,
) -> Result<Vec<Artifact>, CliError> {
    let traj =
        Simulation::new(config).and_then(|mut sim| sim.run(steps, record_choices)).map_err(CliError::core("engine"))?;
    let mut resets = traj.reset_days.iter().peekable();
    let rows = (0..traj.len())
        .map(|t| {
            let reset = resets.next_if(|&&d| d == t as u64).is_some();
            format!("{t},{},{},{}", traj.deltas[t], traj.minority_side[t], u8::from(reset))
        })
        .collect();
    let mut out = vec![Artifact::csv("trajectory.csv", "t,delta,s,reset", rows)];

    let summary = StatsSummary::compute(&traj, tau_max, burn_in).map_err(CliError::core("stats"))?;
    let (post_mean, post_median) = {
        let post: Vec<f64> = stats::post_reset_magnitudes(&traj).iter().map(|&x| x as f64).collect();
        if post.is_empty() {
            (None, None)
        } else {
            (Some(stats::mean(&post)), Some(stats::median(&post)))
        }
    };
    out.push(Artifact::json(
        "summary.json",
        json!({
            "n": config.n,
            "epsilon": config.epsilon,
            "steps": steps,
            "burn_in": burn_in,
            "eta": summary.eta,
            "resets": summary.resets,
            "convergence": summary.convergence,
            "post_reset_abs_delta_mean": post_mean,
            "post_reset_abs_delta_median": post_median,
            "decay_rate": summary.decay_rate,
            "reset_probability": config.reset_probability(),
        }),
    ));
    if want_stats {
        let hist = summary.delta_hist.iter().map(|(d, p)| format!("{d},{}", num(*p))).collect();
        out.push(Artifact::csv("delta_histogram.csv", "delta,probability", hist));
        let acf = summary.s_autocorr.iter().enumerate().map(|(t, c)| format!("{t},{}", num(*c))).collect();
        out.push(Artifact::csv("s_autocorr.csv", "tau,s_autocorr", acf));
    }
    if record_choices {
        let c = match &summary.c_autocorr {
            Some(c) => c.clone(),
            None => stats::c_autocorrelation(traj.choices.as_ref(), tau_max.min(traj.len().saturating_sub(1)))
                .map_err(CliError::core("stats"))?,
        };
        let rows = c.iter().enumerate().map(|(t, v)| format!("{t},{}", num(*v))).collect();
        out.push(Artifact::csv("c_autocorr.csv", "tau,c_autocorr", rows));
    }
    Ok(out)
}

fn sweep(base: &StrategyConfig, epsilons: &[f64], seeds: u64, steps: usize) -> Result<Vec<Artifact>, CliError> {
    let jobs: Vec<(usize, u64)> = (0..epsilons.len()).flat_map(|i| (0..seeds).map(move |s| (i, s))).collect();
    let etas: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, s)| {
            let config = StrategyConfig { epsilon: epsilons[i], ..base.clone() };
            let stream = i as u64 * seeds + s;
            let traj = Simulation::on_stream(&config, stream)?.run(steps, false)?;
            stats::inefficiency_eta(&traj.deltas, traj.n)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::core("engine"))?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (i, chunk) in etas.chunks(seeds as usize).enumerate() {
        let (mean, se) = mean_and_stderr(chunk);
        rows.push(format!("{},{},{},{seeds}", epsilons[i], num(mean), num(se)));
        points.push(json!({ "epsilon": epsilons[i], "eta_mean": mean, "eta_stderr": se, "etas": chunk }));
    }
    Ok(vec![
        Artifact::csv("sweep.csv", "epsilon,eta_mean,eta_stderr,seeds", rows),
        Artifact::json("summary.json", json!({ "n": base.n, "steps": steps, "points": points })),
    ])
}

fn kpr(n: usize, seeds: u64, max_steps: u64, seed: u64) -> Result<Vec<Artifact>, CliError> {
    let runs: Vec<_> = (0..seeds)
        .into_par_iter()
        .map(|s| kpr_run(n, max_steps, &mut stream_rng(seed, s)).map(|(run, _)| run))
        .collect::<Result<_, _>>()
        .map_err(CliError::core("kpr"))?;
    let rows = runs
        .iter()
        .enumerate()
        .map(|(s, r)| format!("{s},{}", r.convergence_day.map(|d| d.to_string()).unwrap_or_default()))
        .collect();
    let days: Vec<f64> = runs.iter().filter_map(|r| r.convergence_day).map(|d| d as f64).collect();
    let pre: Vec<f64> = runs.iter().flat_map(|r| r.utilization[..r.utilization.len() - 1].iter().copied()).collect();
    let summary = json!({
        "n": n,
        "seeds": seeds,
        "converged": days.len(),
        "convergence_day_mean": (!days.is_empty()).then(|| stats::mean(&days)),
        "convergence_day_median": (!days.is_empty()).then(|| stats::median(&days)),
        "convergence_day_max": days.iter().copied().fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d)))),
        "pre_convergence_utilization_mean": (!pre.is_empty()).then(|| stats::mean(&pre)),
        "cyclic_utilization": 1.0,
    });
    Ok(vec![
        Artifact::csv("kpr_convergence.csv", "seed,convergence_day", rows),
        Artifact::json("kpr_summary.json", summary),
    ])
}
