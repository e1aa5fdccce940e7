#![allow(dead_code)]

use delaypo_core::rng::{self, SimRng};
use delaypo_core::scenario::{make_costs, random_policy, random_tabular};
use delaypo_core::{CostFunction, CostKind, Policy, Shape, TabularMdp};
use rand::Rng;

pub fn seeded(seed: u64) -> SimRng {
    rng::stream(seed, 0)
}

pub fn random_shape(rng: &mut SimRng, max_s: usize, max_a: usize, max_h: usize) -> Shape {
    Shape::new(rng.random_range(1..=max_s), rng.random_range(1..=max_a), rng.random_range(1..=max_h)).unwrap()
}

pub struct Instance {
    pub mdp: TabularMdp,
    pub policy: Policy,
    pub other: Policy,
    pub cost: CostFunction,
}

pub fn instance(shape: Shape, rng: &mut SimRng) -> Instance {
    Instance {
        mdp: random_tabular(shape, rng).unwrap(),
        policy: random_policy(shape, rng),
        other: random_policy(shape, rng),
        cost: make_costs(&CostKind::IidUniform {}, shape, 1, rng).unwrap().remove(0),
    }
}
