//! Delay-adapted policy optimization: the tabular learners with known and
//! unknown transitions, the linear-Q learner, and the pieces they share.

pub mod known;
pub mod linear;

pub mod unknown;

use crate::env::{Policy, SaTable, Shape, Trajectory};
use crate::error::{Error, Result};
use crate::hedge::HedgeState;
use crate::report::RegretReport;

/// Relative slack for the audited bounds (`Q̂ ≤ H/γ`, `b ≤ 3H`, …).
pub const BOUND_TOL: f64 = 1e-12;

/// Deliberate defects used to check that the verification suite catches them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Use `min` instead of `max` in the ratio denominator.
    FlipRatioDenominator,
}

/// Whether the estimator and bonus adapt to the policy drift over the delay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Adaptation {
    #[default]
    DelayAdapted,
    /// Ratio forced to one and the bonus weighted by the source policy.
    Naive,
}

/// `r_h(s,a) = π^j_h(a|s) / max(π^j_h(a|s), π^now_h(a|s))`, with `0/0 := 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioTable(SaTable);

impl RatioTable {
    pub fn ones(shape: Shape) -> Self {
        Self(SaTable::filled(shape, 1.0))
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.0.get(h, s, a)
    }

    pub fn table(&self) -> &SaTable {
        &self.0
    }
}

#[inline]
pub(crate) fn ratio_value(source: f64, now: f64, fault: Option<Fault>) -> f64 {
    let denom = match fault {
        Some(Fault::FlipRatioDenominator) => source.min(now),
        None => source.max(now),
    };
    if denom == 0.0 {
        1.0
    } else {
        source / denom
    }
}

/// Delay-adapted ratio between the source policy and the policy at arrival.
pub fn ratio(pi_source: &Policy, pi_now: &Policy) -> Result<RatioTable> {
    ratio_with_fault(pi_source, pi_now, None)
}

pub(crate) fn ratio_with_fault(
    pi_source: &Policy,
    pi_now: &Policy,
    fault: Option<Fault>,
) -> Result<RatioTable> {
    let shape = pi_source.shape();
    shape.ensure_eq(&pi_now.shape(), "ratio")?;
    let data = pi_source
        .table()
        .as_slice()
        .iter()
        .zip(pi_now.table().as_slice())
        .map(|(&src, &now)| ratio_value(src, now, fault))
        .collect();
    Ok(RatioTable(SaTable::from_vec(shape, data)?))
}

/// Delay-adapted importance-sampling estimate
/// `r · 1{visited} · L_h / (q(h,s) π^j(a|s) + γ)`, where `q` is the caller's
/// state-visitation weight (exact or upper bound).
pub(crate) fn importance_estimate(
    traj: &Trajectory,
    r: &RatioTable,
    state_weight: impl Fn(usize, usize) -> f64,
    pi_source: &Policy,
    gamma: f64,
) -> Result<SaTable> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("exploration parameter must be positive, got {gamma}")));
    }
    let shape = pi_source.shape();
    let mut out = SaTable::zeros(shape);
    for h in 0..shape.horizon {
        let (s, a) = (traj.states[h], traj.actions[h]);
        let denom = state_weight(h, s) * pi_source.prob(h, s, a) + gamma;
        out.set(h, s, a, r.get(h, s, a) * traj.cost_to_go[h] / denom);
    }
    Ok(out)
}

/// `Σ_a scale · π^now(a|s) r(a) / (q(h,s) π^j(a|s) + γ)`, with zero-numerator
/// terms dropped so `γ = 0` gives exactly zero.
pub(crate) fn weighted_bonus_sum(
    scale: impl Fn(usize) -> f64,
    pi_now_row: &[f64],
    ratio_row: impl Fn(usize) -> f64,
    state_weight: f64,
    pi_source_row: &[f64],
    gamma: f64,
) -> f64 {
    let mut total = 0.0;
    for a in 0..pi_now_row.len() {
        let num = scale(a) * pi_now_row[a] * ratio_row(a);
        if num != 0.0 {
            total += num / (state_weight * pi_source_row[a] + gamma);
        }
    }
    total
}

/// One exponential-weights learner per `(h, s)`.
#[derive(Clone, Debug)]
pub(crate) struct LocalHedges {
    shape: Shape,
    states: Vec<HedgeState>,
}

impl LocalHedges {
    pub fn new(shape: Shape, eta: f64) -> Result<Self> {
        let proto = HedgeState::new(shape.actions, eta)?;
        Ok(Self { shape, states: vec![proto; shape.state_len()] })
    }

    /// Apply the summed losses of one drain, then refresh `policy`.
    pub fn update(&mut self, losses: &SaTable, policy: &mut Policy) -> Result<()> {
        if !losses.all_finite() {
            return Err(Error::Numeric("non-finite loss reached the policy update".into()));
        }
        for h in 0..self.shape.horizon {
            for s in 0..self.shape.states {
                let hedge = &mut self.states[self.shape.state_index(h, s)];
                hedge.exp_update(&[losses.row(h, s)])?;
                hedge.write_probs(policy.dist_mut(h, s));
            }
        }
        Ok(())
    }
}

/// Running maxima and violation counters collected during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunDiagnostics {
    /// Feedback items used for updates.
    pub arrivals_used: usize,
    /// Feedback items dropped by the skipping filter.
    pub skipped: usize,
    pub ratio_checks: u64,
    /// Pairs where `r · π^now > π^j`.
    pub ratio_violations: u64,
    pub max_q_hat: f64,
    pub min_q_hat: f64,
    pub q_hat_bound: f64,
    pub max_local_bonus: f64,
    pub local_bonus_bound: f64,
    pub max_bonus: f64,
    pub bonus_bound: f64,
    /// Estimates or bonuses outside their stated ranges.
    pub bound_violations: u64,
    /// `max Q̂ · π^now / π^j` over visited pairs: the estimate reweighted to the
    /// policy that consumes it.
    pub max_weighted_estimate: f64,
    pub sandwich_checks: u64,
    pub sandwich_violations: u64,
    pub kernel_outside_set: u64,
    /// Smallest `η Σ_{arrivals} (Q̂ − B̂)` seen by any hedge update.
    pub min_hedge_exponent: f64,
    pub simulator_trajectories: u64,
    pub simulator_transitions: u64,
}

impl RunDiagnostics {
    pub(crate) fn new(q_hat_bound: f64, local_bonus_bound: f64, bonus_bound: f64) -> Self {
        Self {
            arrivals_used: 0,
            skipped: 0,
            ratio_checks: 0,
            ratio_violations: 0,
            max_q_hat: 0.0,
            min_q_hat: 0.0,
            q_hat_bound,
            max_local_bonus: 0.0,
            local_bonus_bound,
            max_bonus: 0.0,
            bonus_bound,
            bound_violations: 0,
            max_weighted_estimate: 0.0,
            sandwich_checks: 0,
            sandwich_violations: 0,
            kernel_outside_set: 0,
            min_hedge_exponent: 0.0,
            simulator_trajectories: 0,
            simulator_transitions: 0,
        }
    }

    fn exceeds(value: f64, bound: f64) -> bool {
        value > bound * (1.0 + BOUND_TOL) + BOUND_TOL
    }

    pub(crate) fn check_ratio(&mut self, r: &RatioTable, pi_now: &Policy, pi_source: &Policy) {
        for ((r, now), src) in r
            .table()
            .as_slice()
            .iter()
            .zip(pi_now.table().as_slice())
            .zip(pi_source.table().as_slice())
        {
            self.ratio_checks += 1;
            if Self::exceeds(r * now, *src) {
                self.ratio_violations += 1;
            }
        }
    }

    /// Tabular estimates must lie in `[0, H/γ]`; linear ones in `[-H/γ, H/γ]`.
    pub(crate) fn check_q_hat(&mut self, q_hat: &SaTable, signed: bool) {
        let (lo, hi) = (q_hat.min(), q_hat.max());
        self.max_q_hat = self.max_q_hat.max(hi);
        self.min_q_hat = self.min_q_hat.min(lo);
        let lower_bad = if signed { Self::exceeds(-lo, self.q_hat_bound) } else { lo < 0.0 };
        if lower_bad || Self::exceeds(hi, self.q_hat_bound) {
            self.bound_violations += 1;
        }
    }

    pub(crate) fn check_local_bonus(&mut self, max: f64, min: f64) {
        self.max_local_bonus = self.max_local_bonus.max(max);
        if min < 0.0 || Self::exceeds(max, self.local_bonus_bound) {
            self.bound_violations += 1;
        }
    }

    pub(crate) fn check_bonus(&mut self, bonus: &SaTable) {
        let (lo, hi) = (bonus.min(), bonus.max());
        self.max_bonus = self.max_bonus.max(hi);
        if lo < 0.0 || Self::exceeds(hi, self.bonus_bound) {
            self.bound_violations += 1;
        }
    }

    pub(crate) fn record_weighted_estimate(
        &mut self,
        traj: &Trajectory,
        q_hat: &SaTable,
        pi_now: &Policy,
        pi_source: &Policy,
    ) {
        for h in 0..traj.horizon() {
            let (s, a) = (traj.states[h], traj.actions[h]);
            let src = pi_source.prob(h, s, a);
            if src > 0.0 {
                let w = q_hat.get(h, s, a) * pi_now.prob(h, s, a) / src;
                self.max_weighted_estimate = self.max_weighted_estimate.max(w);
            }
        }
    }

    /// True when no audited invariant was violated.
    pub fn clean(&self) -> bool {
        self.ratio_violations == 0
            && self.bound_violations == 0
            && self.sandwich_violations == 0
            && self.kernel_outside_set == 0
    }
}

/// Result of one learner run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RegretReport,
    pub diagnostics: RunDiagnostics,
    pub final_policy: Policy,
    /// `π^1, …, π^K` when recorded.
    pub policies: Option<Vec<Policy>>,
}

pub(crate) fn numeric_guard(table: &SaTable, what: &str, episode: usize, source: usize) -> Result<()> {
    if table.all_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "{what} became non-finite at episode {episode} (feedback of episode {source})"
        )))
    }
}

pub(crate) fn validate_rates(eta: f64, gamma: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("eta must be positive and finite, got {eta}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_action_policy(p0: f64) -> Policy {
        let shape = Shape::new(1, 2, 1).unwrap();
        Policy::new(SaTable::from_vec(shape, vec![p0, 1.0 - p0]).unwrap()).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let same = ratio(&two_action_policy(0.3), &two_action_policy(0.3)).unwrap();
        assert!(same.table().as_slice().iter().all(|&r| r == 1.0));
        let up = ratio(&two_action_policy(0.2), &two_action_policy(0.5)).unwrap();
        assert!((up.get(0, 0, 0) - 0.4).abs() < 1e-15);
        let down = ratio(&two_action_policy(0.5), &two_action_policy(0.25)).unwrap();
        assert_eq!(down.get(0, 0, 0), 1.0);
    }

    #[test]
    fn ratio_zero_over_zero_is_one() {
        assert_eq!(ratio_value(0.0, 0.0, None), 1.0);
        assert_eq!(ratio_value(0.0, 0.5, None), 0.0);
    }

    #[test]
    fn flipped_denominator_breaks_the_ratio_inequality() {
        let r = ratio_value(0.2, 0.5, Some(Fault::FlipRatioDenominator));
        assert!(r * 0.5 > 0.2);
    }
}
