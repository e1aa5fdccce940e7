//! Tabular learner with a known transition kernel.

use std::collections::HashMap;

use super::{
    importance_estimate, numeric_guard, ratio_with_fault, validate_rates, weighted_bonus_sum,
    Adaptation, Fault, LocalHedges, RatioTable, RunDiagnostics, RunOutput,
};
use crate::delay::{skip_filter, DelaySchedule, FeedbackBuffer};
use crate::env::{
    evaluate, occupancy, planning_dot, sample_episode, CostFunction, OccupancyMeasure, Policy,
    SaTable, StateTable, TabularMdp, Trajectory,
};
use crate::error::{Error, Result};
use crate::report::RegretReport;
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub struct DapoKnownConfig {
    pub eta: f64,
    pub gamma: f64,
    /// Confidence level the defaults are tuned for; reported only.
    pub delta: f64,
    /// Drop feedback of episodes with delay above this threshold.
    pub skip_beta: Option<f64>,
    pub adaptation: Adaptation,
    /// Keep every played policy in the output.
    pub record_policies: bool,
    pub fault: Option<Fault>,
}

impl DapoKnownConfig {
    pub fn new(eta: f64, gamma: f64) -> Self {
        Self {
            eta,
            gamma,
            delta: 0.1,
            skip_beta: None,
            adaptation: Adaptation::DelayAdapted,
            record_policies: false,
            fault: None,
        }
    }

    /// Tuned rates for an instance of the given size and total delay.
    pub fn tuned(mdp: &TabularMdp, episodes: usize, total_delay: u64) -> Self {
        let (eta, gamma) = default_params(
            mdp.horizon(),
            mdp.num_states(),
            mdp.num_actions(),
            episodes,
            total_delay,
        );
        Self::new(eta, gamma)
    }
}

/// `η = (H²SAK + H⁴(K+D))^{−1/2}` and `γ = 2ηH`.
pub fn default_params(h: usize, s: usize, a: usize, k: usize, d: u64) -> (f64, f64) {
    let (h, s, a, k, d) = (h as f64, s as f64, a as f64, k as f64, d as f64);
    let eta = (h * h * s * a * k + h.powi(4) * (k + d)).powf(-0.5);
    (eta, 2.0 * eta * h)
}

/// Delay-adapted estimate with the exact occupancy of the source policy.
pub fn q_hat(
    traj: &Trajectory,
    r: &RatioTable,
    q_source: &OccupancyMeasure,
    pi_source: &Policy,
    gamma: f64,
) -> Result<SaTable> {
    importance_estimate(traj, r, |h, s| q_source.state(h, s), pi_source, gamma)
}

/// `b_h(s) = Σ_a 3γH π^now(a|s) r(s,a) / (q^j_h(s) π^j(a|s) + γ)`.
pub fn local_bonus(
    r: &RatioTable,
    pi_now: &Policy,
    q_source: &OccupancyMeasure,
    pi_source: &Policy,
    gamma: f64,
    horizon: usize,
) -> StateTable {
    let shape = pi_now.shape();
    let scale = 3.0 * gamma * horizon as f64;
    let mut b = StateTable::zeros(shape);
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            b.set(
                h,
                s,
                weighted_bonus_sum(
                    |_| scale,
                    pi_now.dist(h, s),
                    |a| r.get(h, s, a),
                    q_source.state(h, s),
                    pi_source.dist(h, s),
                    gamma,
                ),
            );
        }
    }
    b
}

/// `B` as the Q-function of `π^j` under the state cost `b`.
pub fn bonus_bellman(mdp: &TabularMdp, pi_source: &Policy, b: &StateTable) -> Result<SaTable> {
    let shape = mdp.shape();
    shape.ensure_eq(&pi_source.shape(), "policy")?;
    shape.ensure_eq(&b.shape(), "local bonus")?;
    let mut out = SaTable::zeros(shape);
    let mut next_value = vec![0.0; shape.states];
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let future =
                    if h + 1 < shape.horizon { planning_dot(mdp.next(h, s, a), &next_value) } else { 0.0 };
                out.set(h, s, a, b.get(h, s) + future);
            }
        }
        for (s, v) in next_value.iter_mut().enumerate() {
            *v = planning_dot(pi_source.dist(h, s), out.row(h, s));
        }
    }
    Ok(out)
}

struct InFlight {
    policy: Policy,
    occupancy: OccupancyMeasure,
}

pub(crate) fn check_inputs(mdp: &TabularMdp, costs: &[CostFunction], schedule: &DelaySchedule) -> Result<()> {
    if costs.is_empty() {
        return Err(Error::Structural("no episodes to play".into()));
    }
    if schedule.episodes() != costs.len() {
        return Err(Error::Shape(format!(
            "{} cost functions for a schedule of {} episodes",
            costs.len(),
            schedule.episodes()
        )));
    }
    for c in costs {
        mdp.shape().ensure_eq(&c.shape(), "cost")?;
    }
    Ok(())
}

/// Play `K = costs.len()` episodes with delayed bandit feedback.
pub fn run(
    mdp: &TabularMdp,
    costs: &[CostFunction],
    schedule: &DelaySchedule,
    config: &DapoKnownConfig,
    rng: &mut SimRng,
) -> Result<RunOutput> {
    check_inputs(mdp, costs, schedule)?;
    validate_rates(config.eta, config.gamma)?;
    let shape = mdp.shape();
    let k_total = costs.len();
    let horizon = shape.horizon as f64;
    let skipped_mask = config
        .skip_beta
        .map(|beta| skip_filter(schedule, beta))
        .unwrap_or_else(|| vec![false; k_total]);

    let mut diag = RunDiagnostics::new(
        horizon / config.gamma,
        3.0 * horizon,
        3.0 * horizon * horizon,
    );
    let mut hedges = LocalHedges::new(shape, config.eta)?;
    let mut policy = Policy::uniform(shape);
    let mut buffer = FeedbackBuffer::new();
    let mut in_flight: HashMap<usize, InFlight> = HashMap::new();
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
            in_flight.insert(k, InFlight { policy: policy.clone(), occupancy: occupancy(mdp, &policy)? });
        }
        buffer.push(k, schedule.delay(k), traj)?;

        let drained = buffer.drain_episode(k, k_total)?;
        arrivals.push(drained.len());
        let mut losses = SaTable::zeros(shape);
        let mut any = false;
        for (j, traj) in drained {
            if skipped_mask[j - 1] {
                diag.skipped += 1;
                continue;
            }
            let source = in_flight.remove(&j).expect("in-flight policy for every pushed episode");
            let loss = evaluate_arrival(mdp, &traj, &source, &policy, config, &mut diag, k, j)?;
            for (l, x) in losses.as_mut_slice().iter_mut().zip(loss.as_slice()) {
                *l += x;
            }
            diag.arrivals_used += 1;
            any = true;
        }
        if any {
            hedges.update(&losses, &mut policy)?;
        }
    }

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

/// `Q̂^j − B^j` for one arrived trajectory.
#[allow(clippy::too_many_arguments)]
fn evaluate_arrival(
    mdp: &TabularMdp,
    traj: &Trajectory,
    source: &InFlight,
    pi_now: &Policy,
    config: &DapoKnownConfig,
    diag: &mut RunDiagnostics,
    k: usize,
    j: usize,
) -> Result<SaTable> {
    let shape = mdp.shape();
    let (r, bonus_policy) = match config.adaptation {
        Adaptation::DelayAdapted => (ratio_with_fault(&source.policy, pi_now, config.fault)?, pi_now),
        Adaptation::Naive => (RatioTable::ones(shape), &source.policy),
    };
    if config.adaptation == Adaptation::DelayAdapted {
        diag.check_ratio(&r, pi_now, &source.policy);
    }
    let q_hat = q_hat(traj, &r, &source.occupancy, &source.policy, config.gamma)?;
    numeric_guard(&q_hat, "Q estimate", k, j)?;
    diag.check_q_hat(&q_hat, false);
    diag.record_weighted_estimate(traj, &q_hat, pi_now, &source.policy);

    let b = local_bonus(&r, bonus_policy, &source.occupancy, &source.policy, config.gamma, shape.horizon);
    let b_min = b.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    diag.check_local_bonus(b.max(), b_min);
    let big_b = bonus_bellman(mdp, &source.policy, &b)?;
    numeric_guard(&big_b, "bonus", k, j)?;
    diag.check_bonus(&big_b);
    q_hat.combine(1.0, &big_b, -1.0)
}
