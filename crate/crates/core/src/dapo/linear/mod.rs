//! Learner for MDPs whose Q-functions are linear in known features, with a
//! simulator: Matrix Geometric Resampling, a delay-adapted least-squares
//! estimate, six local bonuses and a memoized bonus procedure.

mod bonus;
mod features;
mod resampling;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

pub use bonus::{
    local_bonuses_linear, propagate_bonus, sigma_norm_sq, BonusCoefficients, BonusMode, BonusProcedure,
    LinearBonusTerms, SimulatorBudget, PSD_TOL,
};
pub use features::{FeatureMap, FeaturizedMdp, LinearQEnv};
pub use resampling::{
    clip_spectrum, exact_covariance, exact_inverse_covariance, geometric_resampling, op_norm,
    resampling_parameters, series_depth, SigmaPlus, NEUMANN_STEP,
};

use super::known::check_inputs;
use super::{numeric_guard, ratio_with_fault, validate_rates, Fault, LocalHedges, RunDiagnostics, RunOutput};
use crate::delay::{skip_filter, DelaySchedule, FeedbackBuffer};
use crate::env::{evaluate, sample_episode, CostFunction, Policy, SaTable, Trajectory};
use crate::error::{Error, Result};
use crate::report::RegretReport;
use crate::rng::SimRng;

/// `θ̂ = Σ̂⁺ φ L`.
pub fn theta_hat(sigma_plus: &DMatrix<f64>, phi: &[f64], cost_to_go: f64) -> DVector<f64> {
    sigma_plus * DVector::from_column_slice(phi) * cost_to_go
}

/// `Q̂ = r φᵀθ̂`.
pub fn q_hat_linear(r: f64, phi: &[f64], theta: &DVector<f64>) -> f64 {
    r * DVector::from_column_slice(phi).dot(theta)
}

/// Which exploration-parameter formula to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LinearGammaPreset {
    /// `γ = √(n/K)`.
    #[default]
    Statement,
    /// `γ = H√(n/K)`, as used inside the analysis.
    Analysis,
}

/// `(γ, η, β)` with `η = min{γ/(10 H d_max), 1/(H (K+D)^{3/4})}` and skip threshold `β = D^{1/4}`.
pub fn default_params_linear(h: usize, n: usize, k: usize, d: u64, d_max: u64) -> (f64, f64, f64) {
    default_params_linear_preset(h, n, k, d, d_max, LinearGammaPreset::Statement)
}

pub fn default_params_linear_preset(
    h: usize,
    n: usize,
    k: usize,
    d: u64,
    d_max: u64,
    preset: LinearGammaPreset,
) -> (f64, f64, f64) {
    let (hf, nf, kf, df) = (h as f64, n as f64, k as f64, d as f64);
    let base = (nf / kf).sqrt();
    let gamma = match preset {
        LinearGammaPreset::Statement => base,
        LinearGammaPreset::Analysis => hf * base,
    };
    let drift = if d_max == 0 { f64::INFINITY } else { gamma / (10.0 * hf * d_max as f64) };
    let eta = drift.min(1.0 / (hf * (kf + df).powf(0.75)));
    (gamma, eta, df.powf(0.25))
}

/// How `Σ̂⁺` is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CovarianceMode {
    /// Matrix Geometric Resampling from simulated trajectories.
    #[default]
    Sampled,
    /// `(γI + Σ_h)^{-1}` from the known kernel (test instances).
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConfig {
    pub eta: f64,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    /// Resampling repetitions `M`.
    pub reps: u64,
    /// Resampling depth `N`.
    pub depth: usize,
    pub coefficients: BonusCoefficients,
    pub skip_beta: Option<f64>,
    /// Simulator calls available to the bonus procedure over the whole run.
    pub bonus_budget: Option<u64>,
    pub covariance: CovarianceMode,
    pub bonus_mode: BonusMode,
    /// Abort when `η Σ (Q̂ − B̂) ≤ −1` for some pair.
    pub enforce_hedge_precondition: bool,
    pub record_policies: bool,
    pub fault: Option<Fault>,
}

impl LinearConfig {
    /// Defaults for an environment with feature dimension `n`, `K` episodes and the given delays.
    pub fn tuned(horizon: usize, dim: usize, schedule: &DelaySchedule, delta: f64, preset: LinearGammaPreset) -> Self {
        let k = schedule.episodes();
        let (gamma, eta, skip) =
            default_params_linear_preset(horizon, dim, k, schedule.total(), schedule.max() as u64, preset);
        let eps = 1.0 / (horizon * dim * k) as f64;
        let (reps, depth) = resampling_parameters(gamma, eps, delta, horizon, k, dim);
        Self {
            eta,
            gamma,
            eps,
            delta,
            reps,
            depth,
            coefficients: BonusCoefficients::defaults(horizon, dim, gamma, eta),
            skip_beta: Some(skip),
            bonus_budget: None,
            covariance: CovarianceMode::Sampled,
            bonus_mode: BonusMode::Sampled,
            enforce_hedge_precondition: true,
            record_policies: false,
            fault: None,
        }
    }

    /// Replace the resampling parameters, keeping everything else.
    pub fn with_resampling(mut self, reps: u64, depth: usize) -> Self {
        self.reps = reps;
        self.depth = depth;
        self
    }
}

/// Play `K` episodes on `env`; regret is measured through the exact kernel.
pub fn run_linear<E: LinearQEnv + ?Sized>(
    env: &E,
    costs: &[CostFunction],
    schedule: &DelaySchedule,
    config: &LinearConfig,
    rng: &mut SimRng,
) -> Result<RunOutput> {
    let mdp = env
        .exact_model()
        .ok_or_else(|| Error::Config("regret accounting needs an environment with a known kernel".into()))?;
    check_inputs(mdp, costs, schedule)?;
    validate_rates(config.eta, config.gamma)?;
    let shape = mdp.shape();
    let k_total = costs.len();
    let hf = shape.horizon as f64;
    let dim = env.features().dim();
    let skipped_mask = config
        .skip_beta
        .map(|beta| skip_filter(schedule, beta))
        .unwrap_or_else(|| vec![false; k_total]);

    let bonus_bound = 6.0 * hf * (dim as f64).sqrt();
    let mut diag = RunDiagnostics::new(hf / config.gamma, bonus_bound, hf * bonus_bound);
    let mut hedges = LocalHedges::new(shape, config.eta)?;
    let mut policy = Policy::uniform(shape);
    let mut buffer = FeedbackBuffer::new();
    let mut in_flight: HashMap<usize, Policy> = HashMap::new();
    let mut budget = SimulatorBudget::new(config.bonus_budget);
    let mut values = Vec::with_capacity(k_total);
    let mut realized = Vec::with_capacity(k_total);
    let mut arrivals = Vec::with_capacity(k_total);
    let mut history = config.record_policies.then(Vec::new);

    for k in 1..=k_total {
        let cost = &costs[k - 1];
        values.push(evaluate(mdp, &policy, cost)?.initial_value(mdp));
        if let Some(h) = history.as_mut() {
            h.push(policy.clone());
        }
        let traj = sample_episode(mdp, &policy, cost, rng);
        realized.push(traj.total_cost());
        if !skipped_mask[k - 1] {
            in_flight.insert(k, policy.clone());
        }
        buffer.push(k, schedule.delay(k), traj)?;

        let drained = buffer.drain_episode(k, k_total)?;
        arrivals.push(drained.len());
        let used = drained.iter().filter(|(j, _)| !skipped_mask[j - 1]).count();
        diag.skipped += drained.len() - used;
        if used == 0 {
            continue;
        }
        let mut losses = SaTable::zeros(shape);
        for (j, traj) in drained {
            if skipped_mask[j - 1] {
                continue;
            }
            let source = in_flight.remove(&j).expect("in-flight policy for every pushed episode");
            let arrival = Arrival { traj: &traj, source: &source, pi_now: &policy, arrivals: used, k, j };
            let loss = evaluate_arrival(env, &arrival, config, &mut diag, &mut budget, rng)?;
            for (l, x) in losses.as_mut_slice().iter_mut().zip(loss.as_slice()) {
                *l += x;
            }
            diag.arrivals_used += 1;
        }
        let exponent = config.eta * losses.min();
        diag.min_hedge_exponent = diag.min_hedge_exponent.min(exponent);
        if config.enforce_hedge_precondition && exponent <= -1.0 {
            return Err(Error::Precondition(format!(
                "η Σ(Q̂ − B̂) = {exponent} ≤ −1 at episode {k} (η = {}, max |Q̂| = {}, max B̂ = {}); \
                 the learning rate is too large for these estimates",
                config.eta,
                diag.max_q_hat.max(-diag.min_q_hat),
                diag.max_bonus
            )));
        }
        hedges.update(&losses, &mut policy)?;
    }
    diag.simulator_transitions += budget.used();

    let report = RegretReport::build(
        mdp,
        costs,
        schedule.as_slice().to_vec(),
        arrivals,
        values,
        realized,
        diag.skipped,
    )?;
    Ok(RunOutput { report, diagnostics: diag, final_policy: policy, policies: history })
}

struct Arrival<'a> {
    traj: &'a Trajectory,
    source: &'a Policy,
    pi_now: &'a Policy,
    arrivals: usize,
    k: usize,
    j: usize,
}

fn evaluate_arrival<E: LinearQEnv + ?Sized>(
    env: &E,
    arrival: &Arrival<'_>,
    config: &LinearConfig,
    diag: &mut RunDiagnostics,
    budget: &mut SimulatorBudget,
    rng: &mut SimRng,
) -> Result<SaTable> {
    let shape = env.shape();
    let features = env.features();
    let sigma_plus = match config.covariance {
        CovarianceMode::Exact => exact_inverse_covariance(env, arrival.source, config.gamma)?,
        CovarianceMode::Sampled => {
            diag.simulator_trajectories += config.reps * config.depth as u64;
            diag.simulator_transitions +=
                config.reps * config.depth as u64 * shape.horizon.saturating_sub(1) as u64;
            geometric_resampling(env, arrival.source, config.reps, config.depth, config.gamma, rng)?
        }
    };
    let r = ratio_with_fault(arrival.source, arrival.pi_now, config.fault)?;
    diag.check_ratio(&r, arrival.pi_now, arrival.source);

    let mut q_hat = SaTable::zeros(shape);
    for h in 0..shape.horizon {
        let visited = features.phi(h, arrival.traj.states[h], arrival.traj.actions[h]);
        let theta = theta_hat(sigma_plus.step(h), visited, arrival.traj.cost_to_go[h]);
        for s in 0..shape.states {
            for a in 0..shape.actions {
                q_hat.set(h, s, a, q_hat_linear(r.get(h, s, a), features.phi(h, s, a), &theta));
            }
        }
    }
    numeric_guard(&q_hat, "Q estimate", arrival.k, arrival.j)?;
    diag.check_q_hat(&q_hat, true);

    let terms = local_bonuses_linear(&r, arrival.pi_now, arrival.arrivals, env, &sigma_plus, &config.coefficients)?;
    let local = terms.total();
    diag.check_local_bonus(local.max(), terms.min_term());
    let big_b = propagate_bonus(&local, arrival.source, env, config.bonus_mode, budget, rng)?;
    numeric_guard(&big_b, "bonus", arrival.k, arrival.j)?;
    diag.check_bonus(&big_b);
    q_hat.combine(1.0, &big_b, -1.0)
}
