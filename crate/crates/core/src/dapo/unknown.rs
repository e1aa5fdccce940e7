//! Tabular learner with an unknown transition kernel: visit counters,
//! Bernstein confidence sets, occupancy bounds and optimistic bonuses.

use std::collections::HashMap;
use std::rc::Rc;

use super::known::{check_inputs, default_params};
use super::{
    importance_estimate, numeric_guard, ratio_with_fault, validate_rates, weighted_bonus_sum,
    Fault, LocalHedges, RatioTable, RunDiagnostics, RunOutput,
};
use crate::delay::{skip_filter, DelaySchedule, FeedbackBuffer};
use crate::env::{
    evaluate, occupancy, planning_dot, sample_episode, CostFunction, OccupancyMeasure, Policy, SaTable, Shape,
    StateTable, TabularMdp, Trajectory,
};
use crate::error::{Error, Result};
use crate::report::RegretReport;
use crate::rng::SimRng;

/// Slack for the sandwich `q_lo ≤ q ≤ q_hi` and for set membership.
pub const SANDWICH_TOL: f64 = 1e-12;

/// Optimization direction for [`box_simplex_extremize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

/// Extremize `⟨p, v⟩` over `{p : Σp = 1, max(0, p̄−ρ) ≤ p ≤ min(1, p̄+ρ)}`.
///
/// Greedy water-filling: start every coordinate at its lower bound, then pour
/// the remaining mass into coordinates in decreasing (`Max`) or increasing
/// (`Min`) order of `v` up to their upper bounds. Ties go to the lower index.
pub fn box_simplex_extremize(p_bar: &[f64], radius: &[f64], v: &[f64], sense: Sense) -> Result<Vec<f64>> {
    let n = p_bar.len();
    if radius.len() != n || v.len() != n {
        return Err(Error::Shape("box-simplex inputs differ in length".into()));
    }
    let lower: Vec<f64> = p_bar.iter().zip(radius).map(|(p, r)| (p - r).max(0.0)).collect();
    let upper: Vec<f64> = p_bar.iter().zip(radius).map(|(p, r)| (p + r).min(1.0)).collect();
    if radius.iter().all(|&r| r == 0.0) {
        return Ok(p_bar.to_vec());
    }
    let mut order: Vec<usize> = (0..n).collect();
    match sense {
        Sense::Max => order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j))),
        Sense::Min => order.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j))),
    }
    let mut p = lower.clone();
    let mut remaining = 1.0 - lower.iter().sum::<f64>();
    if remaining < -SANDWICH_TOL {
        return Err(Error::Structural(format!("lower bounds exceed the simplex by {}", -remaining)));
    }
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).min(remaining);
        p[i] += add;
        remaining -= add;
    }
    if remaining > SANDWICH_TOL {
        return Err(Error::Structural(format!("box cannot hold unit mass (short by {remaining})")));
    }
    Ok(p)
}

/// `n_h(s, a, s')` over episodes whose feedback has arrived.
#[derive(Clone, Debug, PartialEq)]
pub struct Counters {
    shape: Shape,
    transitions: Vec<u64>,
    visits: Vec<u64>,
}

impl Counters {
    pub fn new(shape: Shape) -> Self {
        let layers = shape.horizon.saturating_sub(1);
        Self {
            shape,
            transitions: vec![0; layers * shape.states * shape.actions * shape.states],
            visits: vec![0; layers * shape.states * shape.actions],
        }
    }

    fn pair(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.shape.states + s) * self.shape.actions + a
    }

    pub fn record(&mut self, traj: &Trajectory) {
        for h in 0..self.shape.horizon.saturating_sub(1) {
            let i = self.pair(h, traj.states[h], traj.actions[h]);
            self.visits[i] += 1;
            self.transitions[i * self.shape.states + traj.states[h + 1]] += 1;
        }
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.pair(h, s, a)]
    }

    pub fn transitions(&self, h: usize, s: usize, a: usize, next: usize) -> u64 {
        self.transitions[self.pair(h, s, a) * self.shape.states + next]
    }
}

/// `ι = ln(10 H S A K / δ)`.
pub fn confidence_log_term(shape: Shape, episodes: usize, delta: f64) -> f64 {
    (10.0 * (shape.horizon * shape.states * shape.actions * episodes) as f64 / delta).ln()
}

/// Bernstein radius `4 √(p̄ ι / (n∨1)) + 10 ι / (n∨1)`.
pub fn bernstein_radius(p_bar: f64, visits: u64, iota: f64) -> f64 {
    let n = visits.max(1) as f64;
    4.0 * (p_bar * iota / n).sqrt() + 10.0 * iota / n
}

/// Empirical kernel with an elementwise radius per `(h, s, a, s')`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceSet {
    shape: Shape,
    p_bar: Vec<f64>,
    radius: Vec<f64>,
}

impl ConfidenceSet {
    pub fn from_counters(counters: &Counters, iota: f64) -> Self {
        let shape = counters.shape;
        let mut p_bar = vec![0.0; counters.transitions.len()];
        let mut radius = vec![0.0; counters.transitions.len()];
        for (pair, &n) in counters.visits.iter().enumerate() {
            let denom = n.max(1) as f64;
            for s2 in 0..shape.states {
                let i = pair * shape.states + s2;
                p_bar[i] = counters.transitions[i] as f64 / denom;
                radius[i] = bernstein_radius(p_bar[i], n, iota);
            }
        }
        Self { shape, p_bar, radius }
    }

    /// The singleton set `{p}` with zero radius.
    pub fn exact(mdp: &TabularMdp) -> Self {
        Self {
            shape: mdp.shape(),
            p_bar: mdp.kernel().to_vec(),
            radius: vec![0.0; mdp.kernel().len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    fn range(&self, h: usize, s: usize, a: usize) -> std::ops::Range<usize> {
        let n = self.shape.states;
        let start = ((h * n + s) * self.shape.actions + a) * n;
        start..start + n
    }

    pub fn p_bar(&self, h: usize, s: usize, a: usize) -> &[f64] {
        &self.p_bar[self.range(h, s, a)]
    }

    pub fn radius(&self, h: usize, s: usize, a: usize) -> &[f64] {
        &self.radius[self.range(h, s, a)]
    }

    /// `max`/`min` of `⟨p', v⟩` over `P_h(s, a)`.
    pub fn extremize(&self, h: usize, s: usize, a: usize, v: &[f64], sense: Sense) -> Result<f64> {
        let p = box_simplex_extremize(self.p_bar(h, s, a), self.radius(h, s, a), v, sense)?;
        Ok(planning_dot(&p, v))
    }

    /// Whether `p'_h(·|s,a)` lies in the set.
    pub fn contains_distribution(&self, h: usize, s: usize, a: usize, p: &[f64]) -> bool {
        let sum: f64 = p.iter().sum();
        (sum - 1.0).abs() <= SANDWICH_TOL
            && p.iter()
                .zip(self.p_bar(h, s, a))
                .zip(self.radius(h, s, a))
                .all(|((x, c), r)| *x >= 0.0 && (x - c).abs() <= r + SANDWICH_TOL)
    }

    /// Whether every next-state vector of `mdp` lies in the set.
    pub fn contains(&self, mdp: &TabularMdp) -> bool {
        let shape = self.shape;
        (0..shape.horizon.saturating_sub(1)).all(|h| {
            (0..shape.states).all(|s| {
                (0..shape.actions).all(|a| self.contains_distribution(h, s, a, mdp.next(h, s, a)))
            })
        })
    }
}

/// Upper and lower state-visitation probabilities over a confidence set.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyBounds {
    pub upper: StateTable,
    pub lower: StateTable,
}

impl OccupancyBounds {
    /// Degenerate bounds `q_lo = q_hi = q` for a known kernel.
    pub fn exact(q: &OccupancyMeasure) -> Self {
        Self { upper: q.states().clone(), lower: q.states().clone() }
    }

    /// `q_hi(h, s) · π(a|s)`: the action draw does not depend on the kernel.
    pub fn pair_upper(&self, policy: &Policy, h: usize, s: usize, a: usize) -> f64 {
        self.upper.get(h, s) * policy.prob(h, s, a)
    }

    pub fn pair_lower(&self, policy: &Policy, h: usize, s: usize, a: usize) -> f64 {
        self.lower.get(h, s) * policy.prob(h, s, a)
    }
}

/// For every `(h, σ)`, the extreme probability of `s_h = σ` over kernels in
/// the set, by a backward DP on the indicator of `σ` at step `h`. The set is
/// rectangular over `(h, s, a)`, so the per-step extremization is exact.
pub fn occupancy_bounds(confidence: &ConfidenceSet, policy: &Policy, initial_state: usize) -> Result<OccupancyBounds> {
    let shape = confidence.shape();
    shape.ensure_eq(&policy.shape(), "policy")?;
    let mut upper = StateTable::zeros(shape);
    let mut lower = StateTable::zeros(shape);
    upper.set(0, initial_state, 1.0);
    lower.set(0, initial_state, 1.0);
    for target_h in 1..shape.horizon {
        for target in 0..shape.states {
            for (sense, table) in [(Sense::Max, &mut upper), (Sense::Min, &mut lower)] {
                let mut v = vec![0.0; shape.states];
                v[target] = 1.0;
                for h in (0..target_h).rev() {
                    let mut prev = vec![0.0; shape.states];
                    for (s, slot) in prev.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (a, &p) in policy.dist(h, s).iter().enumerate() {
                            if p > 0.0 {
                                acc += p * confidence.extremize(h, s, a, &v, sense)?;
                            }
                        }
                        *slot = acc;
                    }
                    v = prev;
                }
                table.set(target_h, target, v[initial_state]);
            }
        }
    }
    Ok(OccupancyBounds { upper, lower })
}

/// Local bonuses `b̃` (exploration) and `b̄` (occupancy uncertainty) and their sum.
pub fn bonuses_unknown(
    r: &RatioTable,
    pi_now: &Policy,
    pi_source: &Policy,
    bounds: &OccupancyBounds,
    gamma: f64,
    horizon: usize,
) -> (StateTable, StateTable, StateTable) {
    let shape = pi_now.shape();
    let hf = horizon as f64;
    let mut tilde = StateTable::zeros(shape);
    let mut bar = StateTable::zeros(shape);
    let mut total = StateTable::zeros(shape);
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            let q_hi = bounds.upper.get(h, s);
            let t = weighted_bonus_sum(
                |_| 3.0 * gamma * hf,
                pi_now.dist(h, s),
                |a| r.get(h, s, a),
                q_hi,
                pi_source.dist(h, s),
                gamma,
            );
            let gap = |a: usize| {
                2.0 * hf
                    * (bounds.pair_upper(pi_source, h, s, a) - bounds.pair_lower(pi_source, h, s, a))
            };
            let b = weighted_bonus_sum(
                gap,
                pi_now.dist(h, s),
                |a| r.get(h, s, a),
                q_hi,
                pi_source.dist(h, s),
                gamma,
            );
            tilde.set(h, s, t);
            bar.set(h, s, b);
            total.set(h, s, t + b);
        }
    }
    (tilde, bar, total)
}

/// `B_h(s,a) = b_h(s) + max_{p' ∈ P_h(s,a)} ⟨p', V^B_{h+1}⟩` with
/// `V^B_{h+1}(s') = ⟨π^j_{h+1}(·|s'), B_{h+1}(s', ·)⟩`.
pub fn optimistic_bonus_bellman(confidence: &ConfidenceSet, pi_source: &Policy, b: &StateTable) -> Result<SaTable> {
    let shape = confidence.shape();
    shape.ensure_eq(&pi_source.shape(), "policy")?;
    shape.ensure_eq(&b.shape(), "local bonus")?;
    let mut out = SaTable::zeros(shape);
    let mut next_value = vec![0.0; shape.states];
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let future = if h + 1 < shape.horizon {
                    confidence.extremize(h, s, a, &next_value, Sense::Max)?
                } else {
                    0.0
                };
                out.set(h, s, a, b.get(h, s) + future);
            }
        }
        for (s, v) in next_value.iter_mut().enumerate() {
            *v = planning_dot(pi_source.dist(h, s), out.row(h, s));
        }
    }
    Ok(out)
}

/// Delay-adapted estimate with the upper occupancy bound in the denominator.
pub fn q_hat_unknown(
    traj: &Trajectory,
    r: &RatioTable,
    bounds: &OccupancyBounds,
    pi_source: &Policy,
    gamma: f64,
) -> Result<SaTable> {
    importance_estimate(traj, r, |h, s| bounds.upper.get(h, s), pi_source, gamma)
}

/// Which learning-rate formula to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UnknownRatePreset {
    /// `η = H (H²SAK + H⁴(K+D))^{−1/2}`.
    #[default]
    Statement,
    /// `η = (H²SAK + H⁴(K+D))^{−1/2}`, as used inside the analysis.
    Analysis,
}

/// `(η, γ)` for unknown transitions with `γ = 2ηH`.
pub fn default_params_unknown(h: usize, s: usize, a: usize, k: usize, d: u64) -> (f64, f64) {
    default_params_unknown_preset(h, s, a, k, d, UnknownRatePreset::Statement)
}

pub fn default_params_unknown_preset(
    h: usize,
    s: usize,
    a: usize,
    k: usize,
    d: u64,
    preset: UnknownRatePreset,
) -> (f64, f64) {
    let (base, _) = default_params(h, s, a, k, d);
    let eta = match preset {
        UnknownRatePreset::Statement => h as f64 * base,
        UnknownRatePreset::Analysis => base,
    };
    (eta, 2.0 * eta * h as f64)
}

/// `β = √(D / (H² S² A))`, the skipping threshold that removes the `d_max` term.
pub fn skip_threshold_unknown(h: usize, s: usize, a: usize, d: u64) -> f64 {
    (d as f64 / (h * h * s * s * a) as f64).sqrt()
}

/// How the learner models the kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransitionModel {
    /// Empirical kernel with Bernstein confidence sets.
    #[default]
    Estimated,
    /// The true kernel with zero radius (test hook: reduces to the known-kernel learner).
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DapoUnknownConfig {
    pub eta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub skip_beta: Option<f64>,
    pub model: TransitionModel,
    /// Check kernel membership and the occupancy sandwich every episode.
    pub audit: bool,
    pub record_policies: bool,
    pub fault: Option<Fault>,
}

impl DapoUnknownConfig {
    pub fn new(eta: f64, gamma: f64, delta: f64) -> Self {
        Self {
            eta,
            gamma,
            delta,
            skip_beta: None,
            model: TransitionModel::Estimated,
            audit: true,
            record_policies: false,
            fault: None,
        }
    }

    pub fn tuned(mdp: &TabularMdp, episodes: usize, total_delay: u64, delta: f64) -> Self {
        let (eta, gamma) = default_params_unknown(
            mdp.horizon(),
            mdp.num_states(),
            mdp.num_actions(),
            episodes,
            total_delay,
        );
        Self::new(eta, gamma, delta)
    }
}

struct InFlight {
    policy: Policy,
    confidence: Rc<ConfidenceSet>,
    bounds: OccupancyBounds,
}

/// Play `K` episodes, learning the kernel from arrived feedback only.
pub fn run_unknown(
    mdp: &TabularMdp,
    costs: &[CostFunction],
    schedule: &DelaySchedule,
    config: &DapoUnknownConfig,
    rng: &mut SimRng,
) -> Result<RunOutput> {
    check_inputs(mdp, costs, schedule)?;
    validate_rates(config.eta, config.gamma)?;
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::Config(format!("delta must lie in (0, 1), got {}", config.delta)));
    }
    let shape = mdp.shape();
    let k_total = costs.len();
    let hf = shape.horizon as f64;
    let iota = confidence_log_term(shape, k_total, config.delta);
    let skipped_mask = config
        .skip_beta
        .map(|beta| skip_filter(schedule, beta))
        .unwrap_or_else(|| vec![false; k_total]);

    let mut diag = RunDiagnostics::new(hf / config.gamma, 5.0 * hf, 5.0 * hf * hf);
    let mut hedges = LocalHedges::new(shape, config.eta)?;
    let mut policy = Policy::uniform(shape);
    let mut counters = Counters::new(shape);
    let mut confidence = Rc::new(match config.model {
        TransitionModel::Estimated => ConfidenceSet::from_counters(&counters, iota),
        TransitionModel::Exact => ConfidenceSet::exact(mdp),
    });
    let mut buffer = FeedbackBuffer::new();
    let mut in_flight: HashMap<usize, InFlight> = HashMap::new();
    let mut values = Vec::with_capacity(k_total);
    let mut realized = Vec::with_capacity(k_total);
    let mut arrivals = Vec::with_capacity(k_total);
    let mut history = config.record_policies.then(Vec::new);

    for k in 1..=k_total {
        let cost = &costs[k - 1];
        let bounds = match config.model {
            TransitionModel::Estimated => occupancy_bounds(&confidence, &policy, mdp.initial_state())?,
            TransitionModel::Exact => OccupancyBounds::exact(&occupancy(mdp, &policy)?),
        };
        if config.audit {
            audit_sandwich(mdp, &policy, &confidence, &bounds, &mut diag)?;
        }
        values.push(evaluate(mdp, &policy, cost)?.initial_value(mdp));
        if let Some(h) = history.as_mut() {
            h.push(policy.clone());
        }
        let traj = sample_episode(mdp, &policy, cost, rng);
        realized.push(traj.total_cost());
        if !skipped_mask[k - 1] {
            in_flight.insert(
                k,
                InFlight { policy: policy.clone(), confidence: Rc::clone(&confidence), bounds },
            );
        }
        buffer.push(k, schedule.delay(k), traj)?;

        let drained = buffer.drain_episode(k, k_total)?;
        arrivals.push(drained.len());
        let mut losses = SaTable::zeros(shape);
        let mut used = Vec::new();
        for (j, traj) in drained {
            if skipped_mask[j - 1] {
                diag.skipped += 1;
                continue;
            }
            let source = in_flight.remove(&j).expect("in-flight state for every pushed episode");
            let r = ratio_with_fault(&source.policy, &policy, config.fault)?;
            diag.check_ratio(&r, &policy, &source.policy);
            let q_hat = q_hat_unknown(&traj, &r, &source.bounds, &source.policy, config.gamma)?;
            numeric_guard(&q_hat, "Q estimate", k, j)?;
            diag.check_q_hat(&q_hat, false);
            diag.record_weighted_estimate(&traj, &q_hat, &policy, &source.policy);
            let (_, _, b) =
                bonuses_unknown(&r, &policy, &source.policy, &source.bounds, config.gamma, shape.horizon);
            let b_min = b.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            diag.check_local_bonus(b.max(), b_min);
            let big_b = optimistic_bonus_bellman(&source.confidence, &source.policy, &b)?;
            numeric_guard(&big_b, "bonus", k, j)?;
            diag.check_bonus(&big_b);
            for ((l, q), bb) in losses
                .as_mut_slice()
                .iter_mut()
                .zip(q_hat.as_slice())
                .zip(big_b.as_slice())
            {
                *l += q - bb;
            }
            diag.arrivals_used += 1;
            used.push(traj);
        }
        if !used.is_empty() {
            hedges.update(&losses, &mut policy)?;
            if config.model == TransitionModel::Estimated {
                for traj in &used {
                    counters.record(traj);
                }
                confidence = Rc::new(ConfidenceSet::from_counters(&counters, iota));
            }
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

fn audit_sandwich(
    mdp: &TabularMdp,
    policy: &Policy,
    confidence: &ConfidenceSet,
    bounds: &OccupancyBounds,
    diag: &mut RunDiagnostics,
) -> Result<()> {
    if !confidence.contains(mdp) {
        diag.kernel_outside_set += 1;
    }
    let q = occupancy(mdp, policy)?;
    let shape = mdp.shape();
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            diag.sandwich_checks += 1;
            let (lo, hi, exact) = (bounds.lower.get(h, s), bounds.upper.get(h, s), q.state(h, s));
            if lo > exact + SANDWICH_TOL || exact > hi + SANDWICH_TOL {
                diag.sandwich_violations += 1;
            }
        }
    }
    Ok(())
}
