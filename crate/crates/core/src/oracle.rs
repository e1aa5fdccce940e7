//! Brute-force reference computations used to cross-check the fast paths.

use crate::dapo::unknown::{ConfidenceSet, Sense};
use crate::dapo::RatioTable;
use crate::env::{CostFunction, Policy, SaTable, Shape, TabularMdp, Trajectory};
use crate::error::{Error, Result};

/// Every state-action path with positive probability and its probability.
pub fn enumerate_trajectories(mdp: &TabularMdp, policy: &Policy, cost: &CostFunction) -> Vec<(f64, Trajectory)> {
    let shape = mdp.shape();
    let mut out = Vec::new();
    let mut states = Vec::with_capacity(shape.horizon);
    let mut actions = Vec::with_capacity(shape.horizon);
    extend(mdp, policy, cost, mdp.initial_state(), 1.0, &mut states, &mut actions, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn extend(
    mdp: &TabularMdp,
    policy: &Policy,
    cost: &CostFunction,
    state: usize,
    prob: f64,
    states: &mut Vec<usize>,
    actions: &mut Vec<usize>,
    out: &mut Vec<(f64, Trajectory)>,
) {
    let h = states.len();
    let horizon = mdp.horizon();
    states.push(state);
    for (a, &pa) in policy.dist(h, state).iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        actions.push(a);
        if h + 1 == horizon {
            let costs = (0..horizon).map(|i| cost.get(i, states[i], actions[i])).collect();
            out.push((prob * pa, Trajectory::new(states.clone(), actions.clone(), costs)));
        } else {
            for (s2, &p) in mdp.next(h, state, a).iter().enumerate() {
                if p > 0.0 {
                    extend(mdp, policy, cost, s2, prob * pa * p, states, actions, out);
                }
            }
        }
        actions.pop();
    }
    states.pop();
}

/// `V^π_1(s_init)` as a sum over enumerated trajectories.
pub fn value_by_enumeration(mdp: &TabularMdp, policy: &Policy, cost: &CostFunction) -> f64 {
    enumerate_trajectories(mdp, policy, cost).iter().map(|(p, t)| p * t.total_cost()).sum()
}

/// `E[estimator(trajectory)]` under `policy`, by enumeration.
pub fn expectation_by_enumeration(
    mdp: &TabularMdp,
    policy: &Policy,
    cost: &CostFunction,
    estimator: impl Fn(&Trajectory) -> Result<SaTable>,
) -> Result<SaTable> {
    let mut acc = SaTable::zeros(mdp.shape());
    for (p, traj) in enumerate_trajectories(mdp, policy, cost) {
        let est = estimator(&traj)?;
        for (x, y) in acc.as_mut_slice().iter_mut().zip(est.as_slice()) {
            *x += p * y;
        }
    }
    Ok(acc)
}

/// `r · q(s,a) · Q(s,a) / (q(s,a) + γ)`: the mean of the delay-adapted estimator.
pub fn estimator_mean_closed_form(
    mdp: &TabularMdp,
    policy: &Policy,
    cost: &CostFunction,
    r: &RatioTable,
    gamma: f64,
) -> Result<SaTable> {
    let q = crate::env::occupancy(mdp, policy)?;
    let values = crate::env::evaluate(mdp, policy, cost)?;
    let shape = mdp.shape();
    let mut out = SaTable::zeros(shape);
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let qa = q.pair(h, s, a);
                out.set(h, s, a, r.get(h, s, a) * qa * values.q.get(h, s, a) / (qa + gamma));
            }
        }
    }
    Ok(out)
}

/// All `A^{SH}` deterministic policies.
pub fn deterministic_policies(shape: Shape) -> Result<Vec<Policy>> {
    let slots = shape.state_len();
    let total = (shape.actions as u64)
        .checked_pow(slots as u32)
        .filter(|&n| n <= 1 << 20)
        .ok_or_else(|| Error::Resource("too many deterministic policies to enumerate".into()))?;
    let mut out = Vec::with_capacity(total as usize);
    let mut choices = vec![0usize; slots];
    for mut code in 0..total {
        for c in choices.iter_mut() {
            *c = (code % shape.actions as u64) as usize;
            code /= shape.actions as u64;
        }
        out.push(Policy::deterministic(shape, &choices)?);
    }
    Ok(out)
}

/// `min_π Σ_k V^π(c^k)` over deterministic policies.
pub fn best_in_hindsight_by_enumeration(mdp: &TabularMdp, costs: &[CostFunction]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for policy in deterministic_policies(mdp.shape())? {
        let total: f64 = costs
            .iter()
            .map(|c| crate::env::evaluate(mdp, &policy, c).map(|v| v.initial_value(mdp)))
            .sum::<Result<f64>>()?;
        best = best.min(total);
    }
    Ok(best)
}

/// Extremum of `⟨p, v⟩` over the box-constrained simplex by vertex enumeration.
///
/// Every vertex has at most one coordinate strictly inside its bounds; the
/// others sit at a lower or upper bound.
pub fn box_simplex_by_vertices(p_bar: &[f64], radius: &[f64], v: &[f64], sense: Sense) -> Option<f64> {
    let n = p_bar.len();
    let lower: Vec<f64> = p_bar.iter().zip(radius).map(|(p, r)| (p - r).max(0.0)).collect();
    let upper: Vec<f64> = p_bar.iter().zip(radius).map(|(p, r)| (p + r).min(1.0)).collect();
    let mut best: Option<f64> = None;
    for free in 0..n {
        for mask in 0u32..(1 << (n - 1)) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                p[i] = if mask >> bit & 1 == 1 { upper[i] } else { lower[i] };
                bit += 1;
            }
            let rest: f64 = p.iter().sum();
            p[free] = 1.0 - rest;
            if p[free] < lower[free] - 1e-12 || p[free] > upper[free] + 1e-12 {
                continue;
            }
            let value: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
            best = Some(match (best, sense) {
                (None, _) => value,
                (Some(b), Sense::Max) => b.max(value),
                (Some(b), Sense::Min) => b.min(value),
            });
        }
    }
    best
}

/// Extreme `Pr[s_h = σ]` for two-state environments, scanning a grid of
/// kernels in the confidence set. Each row `p_h(·|s,a)` is parameterized by
/// its mass on state 0 and sampled at `points` evenly spaced values between
/// the feasible endpoints.
pub fn occupancy_bounds_by_grid(
    confidence: &ConfidenceSet,
    policy: &Policy,
    initial_state: usize,
    points: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let shape = confidence.shape();
    if shape.states != 2 || points < 2 {
        return Err(Error::Config("grid oracle supports two states and at least two points".into()));
    }
    let layers = shape.horizon.saturating_sub(1);
    let rows = layers * shape.actions * shape.states;
    let mut ranges = Vec::with_capacity(rows);
    for h in 0..layers {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let (p, r) = (confidence.p_bar(h, s, a), confidence.radius(h, s, a));
                let lo = (p[0] - r[0]).max(0.0).max(1.0 - (p[1] + r[1]).min(1.0));
                let hi = (p[0] + r[0]).min(1.0).min(1.0 - (p[1] - r[1]).max(0.0));
                if lo > hi + 1e-12 {
                    return Err(Error::Structural("empty confidence row".into()));
                }
                ranges.push((lo, hi.max(lo)));
            }
        }
    }
    let total = (points as u64).checked_pow(rows as u32).filter(|&t| t <= 1 << 24);
    let total = total.ok_or_else(|| Error::Resource("kernel grid too large".into()))?;
    let mut upper = vec![vec![f64::NEG_INFINITY; shape.states]; shape.horizon];
    let mut lower = vec![vec![f64::INFINITY; shape.states]; shape.horizon];
    let mut kernel = vec![0.0; rows * 2];
    for mut code in 0..total {
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            let t = (code % points as u64) as f64 / (points - 1) as f64;
            code /= points as u64;
            let p0 = lo + t * (hi - lo);
            kernel[2 * i] = p0;
            kernel[2 * i + 1] = 1.0 - p0;
        }
        let mdp = TabularMdp::new(shape, initial_state, kernel.clone())?;
        let q = crate::env::occupancy(&mdp, policy)?;
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                upper[h][s] = upper[h][s].max(q.state(h, s));
                lower[h][s] = lower[h][s].min(q.state(h, s));
            }
        }
    }
    Ok((upper, lower))
}
