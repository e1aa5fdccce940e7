//! Delayed exponential weights, run locally per `(h, s)` by every learner,
//! and executable audits of its regret and drift guarantees.

use crate::delay::{DelaySchedule, FeedbackBuffer};
use crate::error::{Error, Result};

/// Slack used when comparing both sides of an audited inequality.
pub const AUDIT_TOL: f64 = 1e-12;

/// Exponential weights over actions, stored as cumulative losses.
///
/// `π(a) ∝ exp(−η · cum_loss[a])`, materialized with max-subtraction.
#[derive(Clone, Debug, PartialEq)]
pub struct HedgeState {
    cum_loss: Vec<f64>,
    eta: f64,
}

impl HedgeState {
    pub fn new(actions: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {eta}")));
        }
        if actions == 0 {
            return Err(Error::Shape("hedge over zero actions".into()));
        }
        Ok(Self { cum_loss: vec![0.0; actions], eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cum_loss(&self) -> &[f64] {
        &self.cum_loss
    }

    /// Add every arrived loss vector to the running sums.
    pub fn exp_update<L: AsRef<[f64]>>(&mut self, arrived: &[L]) -> Result<()> {
        for loss in arrived {
            let loss = loss.as_ref();
            if loss.len() != self.cum_loss.len() {
                return Err(Error::Shape(format!(
                    "loss over {} actions for hedge over {}",
                    loss.len(),
                    self.cum_loss.len()
                )));
            }
            if let Some(bad) = loss.iter().find(|l| !l.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss {bad}")));
            }
        }
        for loss in arrived {
            for (c, l) in self.cum_loss.iter_mut().zip(loss.as_ref()) {
                *c += l;
            }
        }
        Ok(())
    }

    pub fn write_probs(&self, out: &mut [f64]) {
        softmax_of_negated(self.eta, &self.cum_loss, out);
    }

    pub fn probs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cum_loss.len()];
        self.write_probs(&mut out);
        out
    }
}

/// Functional form of [`HedgeState::exp_update`].
pub fn exp_update<L: AsRef<[f64]>>(state: &HedgeState, arrived: &[L]) -> Result<HedgeState> {
    let mut next = state.clone();
    next.exp_update(arrived)?;
    Ok(next)
}

/// `out[a] ∝ exp(−eta · cum[a])`.
fn softmax_of_negated(eta: f64, cum: &[f64], out: &mut [f64]) {
    let max = cum.iter().map(|c| -eta * c).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, c) in out.iter_mut().zip(cum) {
        *o = (-eta * c - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Measured delayed-hedge regret against the two audited upper bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct HedgeAudit {
    /// `Σ_k ⟨π^{k+d^k} − π*, ℓ^k⟩` for the best fixed action in hindsight.
    pub measured_regret: f64,
    /// `ln A/η + 2η Σ_k Σ_a π^{k+d^k}(a) ℓ^k(a)² + 2ηKM²`.
    pub shifted_bound: f64,
    /// `ln A/η + η Σ_k Σ_a π^{k+d^k}(a) m^{k+d^k} ℓ^k(a)²`, available only when
    /// `η Σ_{j: j+d^j=k} ℓ^j(a) > −1` held for every `k` and `a`.
    pub arrival_bound: Option<f64>,
}

impl HedgeAudit {
    pub fn holds(&self) -> bool {
        self.measured_regret <= self.shifted_bound + AUDIT_TOL
            && self.arrival_bound.is_none_or(|b| self.measured_regret <= b + AUDIT_TOL)
    }
}

/// Run delayed hedge on `losses` (one vector per episode) and compute both
/// sides of the delayed exponential-weights regret bounds. Losses must be
/// bounded below by `-floor`.
pub fn hedge_regret_audit(
    losses: &[Vec<f64>],
    schedule: &DelaySchedule,
    eta: f64,
    floor: f64,
) -> Result<HedgeAudit> {
    let k_total = losses.len();
    if schedule.episodes() != k_total {
        return Err(Error::Shape(format!(
            "{} loss vectors for a schedule of {} episodes",
            k_total,
            schedule.episodes()
        )));
    }
    let actions = losses.first().map(Vec::len).unwrap_or(1);
    if floor < 0.0 {
        return Err(Error::Precondition(format!("loss floor M must be >= 0, got {floor}")));
    }
    for (k, l) in losses.iter().enumerate() {
        if let Some(bad) = l.iter().find(|x| **x < -floor || !x.is_finite()) {
            return Err(Error::Precondition(format!(
                "loss {bad} in episode {} is below -M = {}",
                k + 1,
                -floor
            )));
        }
    }

    let mut state = HedgeState::new(actions, eta)?;
    let mut played: Vec<Vec<f64>> = Vec::with_capacity(k_total);
    let mut buffer = FeedbackBuffer::new();
    let mut arrival_ok = true;
    for k in 1..=k_total {
        played.push(state.probs());
        buffer.push(k, schedule.delay(k), ())?;
        let arrived = buffer.drain_episode(k, k_total)?;
        let batch: Vec<&[f64]> = arrived.iter().map(|(j, _)| losses[j - 1].as_slice()).collect();
        for a in 0..actions {
            let s: f64 = batch.iter().map(|l| l[a]).sum();
            if eta * s <= -1.0 {
                arrival_ok = false;
            }
        }
        state.exp_update(&batch)?;
    }

    let counts = schedule.arrival_counts();
    let mut learner = 0.0;
    let mut second_moment = 0.0;
    let mut weighted_moment = 0.0;
    let mut totals = vec![0.0; actions];
    for k in 1..=k_total {
        let arrival = schedule.arrival(k);
        let pi = &played[arrival - 1];
        let m = counts[arrival - 1] as f64;
        for a in 0..actions {
            let l = losses[k - 1][a];
            learner += pi[a] * l;
            second_moment += pi[a] * l * l;
            weighted_moment += pi[a] * m * l * l;
            totals[a] += l;
        }
    }
    let best = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let ln_a = (actions as f64).ln();
    Ok(HedgeAudit {
        measured_regret: learner - best,
        shifted_bound: ln_a / eta
            + 2.0 * eta * second_moment
            + 2.0 * eta * k_total as f64 * floor * floor,
        arrival_bound: arrival_ok.then(|| ln_a / eta + eta * weighted_moment),
    })
}

/// One action's drift against its two-sided bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftCheck {
    pub lower: f64,
    pub drift: f64,
    pub upper: f64,
}

impl DriftCheck {
    pub fn holds(&self) -> bool {
        self.lower - AUDIT_TOL <= self.drift && self.drift <= self.upper + AUDIT_TOL
    }
}

/// Element-wise drift of one exponential-weights step:
/// `−η π(a)(ℓ(a)+M) ≤ π̃(a) − π(a) ≤ η π̃(a) Σ_{a'} π(a')(ℓ(a')+M)`.
pub fn drift_bound_audit(pi: &[f64], eta: f64, loss: &[f64], floor: f64) -> Result<Vec<DriftCheck>> {
    if pi.len() != loss.len() {
        return Err(Error::Shape("policy and loss lengths differ".into()));
    }
    if let Some(bad) = loss.iter().find(|l| **l < -floor) {
        return Err(Error::Precondition(format!("loss {bad} below -M = {}", -floor)));
    }
    // log-domain step from an arbitrary starting distribution
    let logits: Vec<f64> = pi
        .iter()
        .zip(loss)
        .map(|(p, l)| if *p > 0.0 { p.ln() - eta * l } else { f64::NEG_INFINITY })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let next: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let spread: f64 = pi.iter().zip(loss).map(|(p, l)| p * (l + floor)).sum();
    Ok((0..pi.len())
        .map(|a| DriftCheck {
            lower: -eta * pi[a] * (loss[a] + floor),
            drift: next[a] - pi[a],
            upper: eta * next[a] * spread,
        })
        .collect())
}
