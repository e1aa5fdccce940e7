use super::{
    CostFunction, OccupancyMeasure, Policy, SaTable, StateTable, TabularMdp, Trajectory,
    ValueTables,
};
use crate::error::{Error, Result};
use crate::rng::{categorical, SimRng};

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `V^π` and `Q^π` for an arbitrary real-valued cost table (bonuses included).
pub fn evaluate_table(mdp: &TabularMdp, policy: &Policy, costs: &SaTable) -> Result<ValueTables> {
    let shape = mdp.shape();
    shape.ensure_eq(&policy.shape(), "policy")?;
    shape.ensure_eq(&costs.shape(), "costs")?;
    let mut v = StateTable::zeros(shape);
    let mut q = SaTable::zeros(shape);
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let future = if h + 1 < shape.horizon {
                    dot(mdp.next(h, s, a), v.layer(h + 1))
                } else {
                    0.0
                };
                q.set(h, s, a, costs.get(h, s, a) + future);
            }
            v.set(h, s, dot(policy.dist(h, s), q.row(h, s)));
        }
    }
    Ok(ValueTables { v, q })
}

/// Backward Bellman recursion for `(π, c)` with `V_{H+1} ≡ 0`.
pub fn evaluate(mdp: &TabularMdp, policy: &Policy, cost: &CostFunction) -> Result<ValueTables> {
    evaluate_table(mdp, policy, cost.table())
}

/// Forward recursion for the state-action occupancy measure of `π`.
pub fn occupancy(mdp: &TabularMdp, policy: &Policy) -> Result<OccupancyMeasure> {
    let shape = mdp.shape();
    shape.ensure_eq(&policy.shape(), "policy")?;
    let mut pairs = SaTable::zeros(shape);
    let mut states = vec![0.0; shape.states];
    states[mdp.initial_state()] = 1.0;
    for h in 0..shape.horizon {
        for (s, &mass) in states.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (a, &p) in policy.dist(h, s).iter().enumerate() {
                pairs.set(h, s, a, mass * p);
            }
        }
        if h + 1 < shape.horizon {
            let mut next = vec![0.0; shape.states];
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    let w = pairs.get(h, s, a);
                    if w == 0.0 {
                        continue;
                    }
                    for (s2, &p) in mdp.next(h, s, a).iter().enumerate() {
                        next[s2] += w * p;
                    }
                }
            }
            states = next;
        }
    }
    Ok(OccupancyMeasure::new(pairs))
}

/// Play one episode of `π`; only the costs of visited pairs are recorded.
pub fn sample_episode(
    mdp: &TabularMdp,
    policy: &Policy,
    cost: &CostFunction,
    rng: &mut SimRng,
) -> Trajectory {
    let h_max = mdp.horizon();
    let mut states = Vec::with_capacity(h_max);
    let mut actions = Vec::with_capacity(h_max);
    let mut costs = Vec::with_capacity(h_max);
    let mut s = mdp.initial_state();
    for h in 0..h_max {
        let a = categorical(rng, policy.dist(h, s));
        states.push(s);
        actions.push(a);
        costs.push(cost.get(h, s, a));
        if h + 1 < h_max {
            s = categorical(rng, mdp.next(h, s, a));
        }
    }
    Trajectory::new(states, actions, costs)
}

/// Best fixed deterministic policy in hindsight and its cumulative value.
///
/// Values are linear in the cost, so one backward DP on `Σ_k c^k` suffices.
/// Ties go to the lowest action index.
pub fn best_in_hindsight(mdp: &TabularMdp, costs: &[CostFunction]) -> Result<(Policy, f64)> {
    let shape = mdp.shape();
    let first = costs
        .first()
        .ok_or_else(|| Error::Structural("best_in_hindsight needs at least one cost".into()))?;
    shape.ensure_eq(&first.shape(), "costs")?;
    let mut total = SaTable::zeros(shape);
    for c in costs {
        shape.ensure_eq(&c.shape(), "costs")?;
        for (t, x) in total.as_mut_slice().iter_mut().zip(c.table().as_slice()) {
            *t += x;
        }
    }
    let mut choices = vec![0usize; shape.state_len()];
    let mut v = StateTable::zeros(shape);
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            let mut best = f64::INFINITY;
            let mut best_a = 0;
            for a in 0..shape.actions {
                let future = if h + 1 < shape.horizon {
                    dot(mdp.next(h, s, a), v.layer(h + 1))
                } else {
                    0.0
                };
                let q = total.get(h, s, a) + future;
                if q < best {
                    best = q;
                    best_a = a;
                }
            }
            v.set(h, s, best);
            choices[shape.state_index(h, s)] = best_a;
        }
    }
    let policy = Policy::deterministic(shape, &choices)?;
    Ok((policy, v.get(0, mdp.initial_state())))
}

/// Both sides of the value-difference identity
/// `V^π_1 − V^{π*}_1 = Σ_h E_{s∼q^{π*}_h} ⟨π_h(·|s) − π*_h(·|s), Q^π_h(s,·)⟩`.
pub fn value_difference_check(
    mdp: &TabularMdp,
    pi: &Policy,
    pi_star: &Policy,
    cost: &CostFunction,
) -> Result<(f64, f64)> {
    let values = evaluate(mdp, pi, cost)?;
    let star_values = evaluate(mdp, pi_star, cost)?;
    let lhs = values.initial_value(mdp) - star_values.initial_value(mdp);
    let q_star = occupancy(mdp, pi_star)?;
    let shape = mdp.shape();
    let mut rhs = 0.0;
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            let weight = q_star.state(h, s);
            if weight == 0.0 {
                continue;
            }
            let inner: f64 = (0..shape.actions)
                .map(|a| (pi.prob(h, s, a) - pi_star.prob(h, s, a)) * values.q.get(h, s, a))
                .sum();
            rhs += weight * inner;
        }
    }
    Ok((lhs, rhs))
}
