//! Regret accounting.

use std::io::Write;

use crate::env::{best_in_hindsight, CostFunction, SaTable, TabularMdp};
use crate::error::Result;

/// CSV header of the per-episode regret series.
pub const CSV_HEADER: &str = "episode,delay,arrivals,learner_value,cum_regret";

/// Per-episode learner values and the regret series of one run.
///
/// `cum_regret[k-1]` is the regret over the first `k` episodes against the
/// best fixed policy for those `k` cost functions, so the last entry is `R_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub delays: Vec<usize>,
    /// `m^k`: feedback items delivered at the end of episode `k` (skipped ones included).
    pub arrivals: Vec<usize>,
    /// Exact `V^{π^k}_1(s_init; c^k)`.
    pub learner_values: Vec<f64>,
    /// Realized trajectory cost, kept for diagnostics only.
    pub realized_costs: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub best_total: f64,
    pub total_delay: u64,
    pub max_delay: usize,
    pub skipped: usize,
}

impl RegretReport {
    pub(crate) fn build(
        mdp: &TabularMdp,
        costs: &[CostFunction],
        delays: Vec<usize>,
        arrivals: Vec<usize>,
        learner_values: Vec<f64>,
        realized_costs: Vec<f64>,
        skipped: usize,
    ) -> Result<Self> {
        let cum_regret = prefix_regret(mdp, costs, &learner_values)?;
        let (_, best_total) = best_in_hindsight(mdp, costs)?;
        let total_delay = delays.iter().map(|&d| d as u64).sum();
        let max_delay = delays.iter().copied().max().unwrap_or(0);
        Ok(Self {
            delays,
            arrivals,
            learner_values,
            realized_costs,
            cum_regret,
            best_total,
            total_delay,
            max_delay,
            skipped,
        })
    }

    pub fn episodes(&self) -> usize {
        self.learner_values.len()
    }

    /// `R_K`.
    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    /// Regret over the first `k` episodes.
    pub fn regret_at(&self, k: usize) -> f64 {
        self.cum_regret[k - 1]
    }

    pub fn learner_total(&self) -> f64 {
        self.learner_values.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for k in 0..self.episodes() {
            writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                self.delays[k],
                self.arrivals[k],
                self.learner_values[k],
                self.cum_regret[k]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Regret of every prefix, each against its own best policy in hindsight.
fn prefix_regret(mdp: &TabularMdp, costs: &[CostFunction], values: &[f64]) -> Result<Vec<f64>> {
    let shape = mdp.shape();
    let mut total = SaTable::zeros(shape);
    let mut learner = 0.0;
    let mut out = Vec::with_capacity(values.len());
    let mut v_next = vec![0.0; shape.states];
    let mut v_cur = vec![0.0; shape.states];
    for (c, value) in costs.iter().zip(values) {
        for (t, x) in total.as_mut_slice().iter_mut().zip(c.table().as_slice()) {
            *t += x;
        }
        learner += value;
        v_next.iter_mut().for_each(|v| *v = 0.0);
        for h in (0..shape.horizon).rev() {
            for (s, slot) in v_cur.iter_mut().enumerate() {
                let mut best = f64::INFINITY;
                for a in 0..shape.actions {
                    let future = if h + 1 < shape.horizon {
                        crate::env::planning_dot(mdp.next(h, s, a), &v_next)
                    } else {
                        0.0
                    };
                    best = best.min(total.get(h, s, a) + future);
                }
                *slot = best;
            }
            std::mem::swap(&mut v_cur, &mut v_next);
        }
        out.push(learner - v_next[mdp.initial_state()]);
    }
    Ok(out)
}
