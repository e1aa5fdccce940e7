mod common;

use common::seeded;
use delaypo_core::dapo::known::{self, DapoKnownConfig};
use delaypo_core::rng;
use delaypo_core::scenario::{make_costs, random_tabular};
use delaypo_core::{run_baseline, BaselineKind, CostKind, DelaySchedule, Policy, Shape};

fn drift_setup(k: usize) -> (delaypo_core::TabularMdp, Vec<delaypo_core::CostFunction>) {
    let shape = Shape::new(3, 3, 3).unwrap();
    let mut rng = seeded(91);
    let mdp = random_tabular(shape, &mut rng).unwrap();
    let flips = (1..k).step_by(60).skip(1).collect();
    let costs = make_costs(&CostKind::AdversarialDrift { flips }, shape, k, &mut rng).unwrap();
    (mdp, costs)
}

#[test]
fn naive_estimates_outgrow_the_adapted_ones_under_drift() {
    let k = 600;
    let (mdp, costs) = drift_setup(k);
    let schedule = DelaySchedule::new(vec![40; k]);
    let config = DapoKnownConfig::new(0.5, 0.05);
    let adapted = known::run(&mdp, &costs, &schedule, &config, &mut rng::stream(91, 3)).unwrap();
    let naive =
        run_baseline(BaselineKind::NaiveDelayedPo, &mdp, &costs, &schedule, &config, &mut rng::stream(91, 3)).unwrap();
    let bound = 3.0 / config.gamma;
    assert!(adapted.diagnostics.max_weighted_estimate <= bound * (1.0 + 1e-12));
    assert!(naive.diagnostics.max_weighted_estimate > bound);
}

#[test]
fn oracle_baseline_ignores_the_schedule() {
    let (mdp, costs) = drift_setup(100);
    let config = DapoKnownConfig::new(0.2, 0.05);
    let oracle = run_baseline(
        BaselineKind::OracleNondelayedPo,
        &mdp,
        &costs,
        &DelaySchedule::new(vec![7; 100]),
        &config,
        &mut rng::stream(92, 3),
    )
    .unwrap();
    let direct = known::run(&mdp, &costs, &DelaySchedule::zeros(100), &config, &mut rng::stream(92, 3)).unwrap();
    assert_eq!(oracle.report, direct.report);
}

#[test]
fn uniform_baseline_plays_uniformly() {
    let (mdp, costs) = drift_setup(20);
    let config = DapoKnownConfig { record_policies: true, ..DapoKnownConfig::new(0.2, 0.05) };
    let out = run_baseline(
        BaselineKind::UniformRandom,
        &mdp,
        &costs,
        &DelaySchedule::new(vec![3; 20]),
        &config,
        &mut rng::stream(93, 3),
    )
    .unwrap();
    assert!(out.policies.unwrap().iter().all(|p| *p == Policy::uniform(mdp.shape())));
    assert_eq!(out.report.arrivals.iter().sum::<usize>(), 20);
}
