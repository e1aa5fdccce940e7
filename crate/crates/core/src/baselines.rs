//! Reference learners for comparison with the delay-adapted ones.

use serde::{Deserialize, Serialize};

use crate::dapo::known::{self, DapoKnownConfig};
use crate::dapo::{Adaptation, RunDiagnostics, RunOutput};
use crate::delay::DelaySchedule;
use crate::env::{evaluate, sample_episode, CostFunction, Policy, TabularMdp};
use crate::error::Result;
use crate::report::RegretReport;
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Delayed policy optimization without the ratio and with the bonus of the
    /// policy that generated the feedback.
    NaiveDelayedPo,
    /// The delay-adapted learner run as if every delay were zero.
    OracleNondelayedPo,
    /// Uniformly random actions throughout.
    UniformRandom,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] =
        [BaselineKind::NaiveDelayedPo, BaselineKind::OracleNondelayedPo, BaselineKind::UniformRandom];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::NaiveDelayedPo => "naive_delayed_po",
            BaselineKind::OracleNondelayedPo => "oracle_nondelayed_po",
            BaselineKind::UniformRandom => "uniform_random",
        }
    }
}

/// Run a baseline. `config` supplies the rates for the policy-optimization baselines.
pub fn run_baseline(
    kind: BaselineKind,
    mdp: &TabularMdp,
    costs: &[CostFunction],
    schedule: &DelaySchedule,
    config: &DapoKnownConfig,
    rng: &mut SimRng,
) -> Result<RunOutput> {
    match kind {
        BaselineKind::NaiveDelayedPo => {
            let config = DapoKnownConfig { adaptation: Adaptation::Naive, ..config.clone() };
            known::run(mdp, costs, schedule, &config, rng)
        }
        BaselineKind::OracleNondelayedPo => {
            let config = DapoKnownConfig { skip_beta: None, ..config.clone() };
            known::run(mdp, costs, &DelaySchedule::zeros(costs.len()), &config, rng)
        }
        BaselineKind::UniformRandom => uniform(mdp, costs, schedule, config.record_policies, rng),
    }
}

fn uniform(
    mdp: &TabularMdp,
    costs: &[CostFunction],
    schedule: &DelaySchedule,
    record: bool,
    rng: &mut SimRng,
) -> Result<RunOutput> {
    known::check_inputs(mdp, costs, schedule)?;
    let policy = Policy::uniform(mdp.shape());
    let mut values = Vec::with_capacity(costs.len());
    let mut realized = Vec::with_capacity(costs.len());
    for cost in costs {
        values.push(evaluate(mdp, &policy, cost)?.initial_value(mdp));
        realized.push(sample_episode(mdp, &policy, cost, rng).total_cost());
    }
    let report = RegretReport::build(
        mdp,
        costs,
        schedule.as_slice().to_vec(),
        schedule.arrival_counts(),
        values,
        realized,
        0,
    )?;
    Ok(RunOutput {
        report,
        diagnostics: RunDiagnostics::new(0.0, 0.0, 0.0),
        final_policy: policy.clone(),
        policies: record.then(|| vec![policy; costs.len()]),
    })
}
