//! Fixtures shared by the benchmarks.

use delaypo_core::rng::{stream, streams};
use delaypo_core::scenario::{make_costs, random_policy, random_tabular};
use delaypo_core::{CostFunction, CostKind, DelayKind, DelaySchedule, Policy, Shape, TabularMdp};

pub struct Fixture {
    pub mdp: TabularMdp,
    pub costs: Vec<CostFunction>,
    pub schedule: DelaySchedule,
    pub policy: Policy,
}

/// A random environment with `episodes` iid costs and uniform delays in `[0, max_delay]`.
pub fn fixture(shape: Shape, episodes: usize, max_delay: i64, seed: u64) -> Fixture {
    let mdp = random_tabular(shape, &mut stream(seed, streams::ENVIRONMENT)).expect("valid shape");
    let mut cost_rng = stream(seed, streams::COSTS);
    let costs = make_costs(&CostKind::IidUniform {}, shape, episodes, &mut cost_rng).expect("valid costs");
    let policy = random_policy(shape, &mut cost_rng);
    let schedule = delaypo_core::delay::make_schedule(
        &DelayKind::Uniform { lo: 0, hi: max_delay },
        episodes,
        &mut stream(seed, streams::DELAYS),
    )
    .expect("valid delays");
    Fixture { mdp, costs, schedule, policy }
}
