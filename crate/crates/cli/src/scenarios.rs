//! Scenario files bundled with the binary.

use delaypo_core::Result;

use crate::config::RunConfig;

pub const SHIPPED: &[(&str, &str)] = &[
    ("sublinearity", include_str!("../../../scenarios/sublinearity.json")),
    ("sandwich", include_str!("../../../scenarios/sandwich.json")),
    ("linear_low_rank", include_str!("../../../scenarios/linear_low_rank.json")),
    ("drift", include_str!("../../../scenarios/drift.json")),
    ("drift_naive", include_str!("../../../scenarios/drift_naive.json")),
];

pub fn shipped(name: &str) -> Result<RunConfig> {
    let (_, text) = SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| delaypo_core::Error::Config(format!("no shipped scenario `{name}`")))?;
    RunConfig::from_json(text)
}

pub fn all() -> Result<Vec<(&'static str, RunConfig)>> {
    SHIPPED.iter().map(|(n, t)| Ok((*n, RunConfig::from_json(t)?))).collect()
}
