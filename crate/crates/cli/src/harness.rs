//! Run orchestration, summaries and sweeps.

use std::fs;
use std::path::Path;

use delaypo_core::dapo::known::{self, DapoKnownConfig};
use delaypo_core::dapo::linear::{self, BonusCoefficients, LinearConfig, LinearQEnv};
use delaypo_core::dapo::unknown::{self, default_params_unknown_preset, DapoUnknownConfig};
use delaypo_core::dapo::{Fault, RunOutput};
use delaypo_core::delay::make_schedule;
use delaypo_core::rng::{stream, streams};
use delaypo_core::scenario::{make_costs, make_env, make_linear_costs, make_linear_env};
use delaypo_core::{run_baseline, DelayKind, EnvKind, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};

/// Largest resampling repetition count accepted without an explicit override.
pub const MAX_DEFAULT_REPS: u64 = 1_000_000;

/// Extra knobs that are not part of the JSON schema.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub fault: Option<Fault>,
    pub record_policies: bool,
}

/// One seed of a run.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub output: RunOutput,
}

/// Run a single seed.
pub fn run_seed(config: &RunConfig, seed: u64, options: RunOptions) -> Result<RunOutput> {
    let k = config.episodes;
    let over = &config.overrides;
    let schedule = make_schedule(&config.delays, k, &mut stream(seed, streams::DELAYS))?;
    let mut learner_rng = stream(seed, streams::LEARNER);
    let mut env_rng = stream(seed, streams::ENVIRONMENT);
    let mut cost_rng = stream(seed, streams::COSTS);
    let delta = over.delta.unwrap_or(0.1);

    if config.algorithm == Algorithm::DapoLinear {
        let env = make_linear_env(&config.env, &mut env_rng)?;
        let costs = match config.env {
            EnvKind::LowRank { .. } => make_linear_costs(&config.costs, env.features(), k, &mut cost_rng)?,
            _ => make_costs(&config.costs, env.shape(), k, &mut cost_rng)?,
        };
        let horizon = env.shape().horizon;
        let dim = env.features().dim();
        let mut lc = LinearConfig::tuned(horizon, dim, &schedule, delta, over.linear_preset());
        if over.reps.is_none() && lc.reps > MAX_DEFAULT_REPS {
            return Err(Error::Config(format!(
                "the tuned resampling count M = {} is not practical; set overrides.reps",
                lc.reps
            )));
        }
        lc.eta = over.eta.unwrap_or(lc.eta);
        lc.gamma = over.gamma.unwrap_or(lc.gamma);
        lc.coefficients = BonusCoefficients::defaults(horizon, dim, lc.gamma, lc.eta);
        lc.reps = over.reps.unwrap_or(lc.reps);
        lc.depth = over.depth.unwrap_or(lc.depth);
        lc.skip_beta = over.skip_beta.or(lc.skip_beta);
        lc.bonus_budget = over.bonus_budget;
        lc.covariance = over.covariance_mode().unwrap_or(lc.covariance);
        lc.bonus_mode = over.bonus_mode().unwrap_or(lc.bonus_mode);
        lc.enforce_hedge_precondition = over.enforce_hedge_precondition.unwrap_or(true);
        lc.record_policies = options.record_policies;
        lc.fault = options.fault;
        return linear::run_linear(&env, &costs, &schedule, &lc, &mut learner_rng);
    }

    let mdp = make_env(&config.env, &mut env_rng)?;
    let costs = make_costs(&config.costs, mdp.shape(), k, &mut cost_rng)?;
    let (h, s, a) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    match config.algorithm {
        Algorithm::DapoUnknown => {
            let (eta, gamma) = default_params_unknown_preset(h, s, a, k, schedule.total(), over.unknown_preset());
            let mut uc = DapoUnknownConfig::new(over.eta.unwrap_or(eta), over.gamma.unwrap_or(gamma), delta);
            uc.skip_beta = over.skip_beta;
            uc.record_policies = options.record_policies;
            uc.fault = options.fault;
            unknown::run_unknown(&mdp, &costs, &schedule, &uc, &mut learner_rng)
        }
        _ => {
            let mut kc = DapoKnownConfig::tuned(&mdp, k, schedule.total());
            kc.eta = over.eta.unwrap_or(kc.eta);
            kc.gamma = over.gamma.unwrap_or(kc.gamma);
            kc.delta = delta;
            kc.skip_beta = over.skip_beta;
            kc.record_policies = options.record_policies;
            kc.fault = options.fault;
            match config.algorithm {
                Algorithm::Baseline(kind) => run_baseline(kind, &mdp, &costs, &schedule, &kc, &mut learner_rng),
                _ => known::run(&mdp, &costs, &schedule, &kc, &mut learner_rng),
            }
        }
    }
}

/// Run every seed in parallel; results keep the configured seed order.
pub fn run_all(config: &RunConfig, options: RunOptions) -> Result<Vec<SeedRun>> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, seed, options).map(|output| SeedRun { seed, output }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_regret: f64,
    pub learner_total: f64,
    pub best_total: f64,
    pub total_delay: u64,
    pub max_delay: usize,
    pub skipped: usize,
    pub invariants_clean: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub episodes: usize,
    pub final_regret_mean: f64,
    /// Population standard deviation across seeds.
    pub final_regret_std: f64,
    pub seeds: Vec<SeedSummary>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(config: &RunConfig, runs: &[SeedRun]) -> Summary {
    let seeds: Vec<SeedSummary> = runs
        .iter()
        .map(|r| {
            let rep = &r.output.report;
            SeedSummary {
                seed: r.seed,
                final_regret: rep.final_regret(),
                learner_total: rep.learner_total(),
                best_total: rep.best_total,
                total_delay: rep.total_delay,
                max_delay: rep.max_delay,
                skipped: rep.skipped,
                invariants_clean: r.output.diagnostics.clean(),
            }
        })
        .collect();
    let finals: Vec<f64> = seeds.iter().map(|s| s.final_regret).collect();
    let (mean, std) = mean_std(&finals);
    Summary {
        algorithm: config.algorithm.to_string(),
        episodes: config.episodes,
        final_regret_mean: mean,
        final_regret_std: std,
        seeds,
    }
}

/// Write `run_seed<S>.csv` per seed and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, runs: &[SeedRun], summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in runs {
        fs::write(dir.join(format!("run_seed{}.csv", run.seed)), run.output.report.to_csv_string())?;
    }
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Delay,
    Episodes,
    Eta,
    Gamma,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delay" => Ok(SweepAxis::Delay),
            "K" | "k" | "episodes" => Ok(SweepAxis::Episodes),
            "eta" => Ok(SweepAxis::Eta),
            "gamma" => Ok(SweepAxis::Gamma),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (expected delay, K, eta or gamma)"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Delay => "delay",
            SweepAxis::Episodes => "K",
            SweepAxis::Eta => "eta",
            SweepAxis::Gamma => "gamma",
        }
    }

    /// `config` with this axis set to `value`.
    pub fn apply(self, config: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut out = config.clone();
        let integer = || -> Result<i64> {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::Config(format!("{} values must be non-negative integers, got {value}", self.name())));
            }
            Ok(value as i64)
        };
        match self {
            SweepAxis::Delay => out.delays = DelayKind::Constant { delay: integer()? },
            SweepAxis::Episodes => out.episodes = integer()? as usize,
            SweepAxis::Eta => out.overrides.eta = Some(value),
            SweepAxis::Gamma => out.overrides.gamma = Some(value),
        }
        out.validate()?;
        Ok(out)
    }
}

pub const SWEEP_HEADER: &str = "axis,value,final_regret_mean,final_regret_std,seeds";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Summary,
}

/// One summary per axis value, in the order given.
pub fn sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    values
        .par_iter()
        .map(|&value| {
            let point = axis.apply(config, value)?;
            let runs = run_all(&point, RunOptions::default())?;
            Ok(SweepRow { value, summary: summarize(&point, &runs) })
        })
        .collect()
}

pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            axis.name(),
            row.value,
            row.summary.final_regret_mean,
            row.summary.final_regret_std,
            row.summary.seeds.len()
        ));
    }
    out
}
