mod common;

use common::{instance, random_shape, seeded};
use delaypo_core::env::{best_in_hindsight, evaluate, occupancy, sample_episode, value_difference_check, EnvDocument};
use delaypo_core::oracle::{best_in_hindsight_by_enumeration, value_by_enumeration};
use delaypo_core::rng;
use delaypo_core::scenario::{make_costs, random_tabular};
use delaypo_core::{CostKind, Shape};
use proptest::prelude::*;

#[test]
fn evaluation_matches_trajectory_enumeration() {
    let mut rng = seeded(11);
    for _ in 0..200 {
        let shape = random_shape(&mut rng, 3, 3, 3);
        let inst = instance(shape, &mut rng);
        let fast = evaluate(&inst.mdp, &inst.policy, &inst.cost).unwrap().initial_value(&inst.mdp);
        let slow = value_by_enumeration(&inst.mdp, &inst.policy, &inst.cost);
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }
}

#[test]
fn occupancy_layers_are_distributions() {
    let mut rng = seeded(12);
    for _ in 0..100 {
        let shape = random_shape(&mut rng, 5, 4, 5);
        let inst = instance(shape, &mut rng);
        let q = occupancy(&inst.mdp, &inst.policy).unwrap();
        for h in 0..shape.horizon {
            let total: f64 = q.states().layer(h).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for s in 0..shape.states {
                let pairs: f64 = (0..shape.actions).map(|a| q.pair(h, s, a)).sum();
                assert!((pairs - q.state(h, s)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn value_difference_identity_holds() {
    let mut rng = seeded(13);
    for _ in 0..100 {
        let shape = random_shape(&mut rng, 4, 3, 4);
        let inst = instance(shape, &mut rng);
        let (lhs, rhs) = value_difference_check(&inst.mdp, &inst.policy, &inst.other, &inst.cost).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn best_in_hindsight_matches_policy_enumeration() {
    let mut rng = seeded(14);
    for _ in 0..40 {
        let shape = random_shape(&mut rng, 2, 2, 3);
        let mdp = random_tabular(shape, &mut rng).unwrap();
        let costs = make_costs(&CostKind::IidUniform {}, shape, 5, &mut rng).unwrap();
        let (policy, total) = best_in_hindsight(&mdp, &costs).unwrap();
        let brute = best_in_hindsight_by_enumeration(&mdp, &costs).unwrap();
        assert!((total - brute).abs() < 1e-10);
        let achieved: f64 = costs.iter().map(|c| evaluate(&mdp, &policy, c).unwrap().initial_value(&mdp)).sum();
        assert!((achieved - total).abs() < 1e-10);
    }
}

#[test]
fn best_in_hindsight_of_nothing_is_an_error() {
    let shape = Shape::new(2, 2, 2).unwrap();
    let mdp = random_tabular(shape, &mut seeded(1)).unwrap();
    assert!(best_in_hindsight(&mdp, &[]).is_err());
}

#[test]
fn sampled_costs_average_to_the_value() {
    let shape = Shape::new(3, 2, 3).unwrap();
    let inst = instance(shape, &mut seeded(15));
    let mut rng = rng::stream(15, 3);
    let n = 200_000;
    let mean: f64 =
        (0..n).map(|_| sample_episode(&inst.mdp, &inst.policy, &inst.cost, &mut rng).total_cost()).sum::<f64>() / n as f64;
    let exact = evaluate(&inst.mdp, &inst.policy, &inst.cost).unwrap().initial_value(&inst.mdp);
    assert!((mean - exact).abs() < 0.02, "{mean} vs {exact}");
}

#[test]
fn environment_documents_round_trip() {
    let shape = Shape::new(3, 2, 3).unwrap();
    let mut rng = seeded(16);
    let mdp = random_tabular(shape, &mut rng).unwrap();
    let costs = make_costs(&CostKind::IidUniform {}, shape, 2, &mut rng).unwrap();
    let json = EnvDocument::from_parts(&mdp, &costs).to_json().unwrap();
    let (mdp2, costs2) = EnvDocument::from_json(&json).unwrap().into_parts().unwrap();
    assert_eq!(mdp, mdp2);
    assert_eq!(costs, costs2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn values_are_bounded_by_the_horizon(seed in any::<u64>(), s in 1usize..5, a in 1usize..4, h in 1usize..5) {
        let shape = Shape::new(s, a, h).unwrap();
        let inst = instance(shape, &mut seeded(seed));
        let v = evaluate(&inst.mdp, &inst.policy, &inst.cost).unwrap().initial_value(&inst.mdp);
        prop_assert!((0.0..=h as f64 + 1e-12).contains(&v));
    }
}
