//! Instance and cost-sequence generators.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dapo::linear::{FeatureMap, FeaturizedMdp};
use crate::env::{CostFunction, EnvDocument, SaTable, Shape, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::{uniform, SimRng};

/// Ways to obtain an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvKind {
    /// Every next-state distribution drawn uniformly from the simplex.
    RandomTabular { states: usize, actions: usize, horizon: usize },
    /// Random low-rank kernel with `dim` latent factors.
    LowRank { states: usize, actions: usize, horizon: usize, dim: usize },
    /// An environment JSON document; its costs, if any, are ignored.
    File { path: String },
}

/// Ways to generate `K` cost functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostKind {
    /// Independent `U[0,1]` entries every episode.
    IidUniform {},
    /// A fixed base table mixed half-and-half with a fresh table every `period` episodes.
    PiecewiseConstant { period: usize },
    /// `½ + ½ sin(2πk/period + φ(h,s,a))` with random phases.
    Sinusoidal { period: usize },
    /// A random table that swaps with its complement `1 − c` at each listed episode.
    AdversarialDrift { flips: Vec<usize> },
    Zero {},
}

/// A random tabular MDP starting in state 0.
pub fn random_tabular(shape: Shape, rng: &mut SimRng) -> Result<TabularMdp> {
    let layers = shape.horizon.saturating_sub(1);
    let weights = (0..layers * shape.states * shape.actions * shape.states)
        .map(|_| -(1.0 - uniform(rng)).ln())
        .collect();
    TabularMdp::from_weights(shape, 0, weights)
}

/// Build the tabular environment described by `kind`.
pub fn make_env(kind: &EnvKind, rng: &mut SimRng) -> Result<TabularMdp> {
    match kind {
        EnvKind::RandomTabular { states, actions, horizon } => {
            random_tabular(Shape::new(*states, *actions, *horizon)?, rng)
        }
        EnvKind::LowRank { .. } => Ok(make_linear_env(kind, rng)?.mdp().clone()),
        EnvKind::File { path } => {
            let text = std::fs::read_to_string(Path::new(path))?;
            Ok(EnvDocument::from_json(&text)?.into_parts()?.0)
        }
    }
}

/// Build a featurized environment: low-rank kinds keep their factors, all
/// others get indicator features.
pub fn make_linear_env(kind: &EnvKind, rng: &mut SimRng) -> Result<FeaturizedMdp> {
    match kind {
        EnvKind::LowRank { states, actions, horizon, dim } => {
            FeaturizedMdp::random_low_rank(Shape::new(*states, *actions, *horizon)?, *dim, 0, rng)
        }
        _ => Ok(FeaturizedMdp::one_hot(make_env(kind, rng)?)),
    }
}

fn random_table(shape: Shape, rng: &mut SimRng) -> Vec<f64> {
    (0..shape.pair_len()).map(|_| uniform(rng)).collect()
}

/// `episodes` cost functions over `shape`.
pub fn make_costs(kind: &CostKind, shape: Shape, episodes: usize, rng: &mut SimRng) -> Result<Vec<CostFunction>> {
    let tables: Vec<Vec<f64>> = match kind {
        CostKind::IidUniform {} => (0..episodes).map(|_| random_table(shape, rng)).collect(),
        CostKind::PiecewiseConstant { period } => {
            if *period == 0 {
                return Err(Error::Config("piecewise-constant period must be positive".into()));
            }
            let base = random_table(shape, rng);
            let mut out = Vec::with_capacity(episodes);
            let mut block = Vec::new();
            for k in 0..episodes {
                if k % period == 0 {
                    block = random_table(shape, rng).iter().zip(&base).map(|(x, b)| 0.5 * b + 0.5 * x).collect();
                }
                out.push(block.clone());
            }
            out
        }
        CostKind::Sinusoidal { period } => {
            if *period == 0 {
                return Err(Error::Config("sinusoidal period must be positive".into()));
            }
            let phases: Vec<f64> = (0..shape.pair_len()).map(|_| 2.0 * PI * uniform(rng)).collect();
            (0..episodes)
                .map(|k| {
                    let t = 2.0 * PI * (k + 1) as f64 / *period as f64;
                    phases.iter().map(|p| (0.5 + 0.5 * (t + p).sin()).clamp(0.0, 1.0)).collect()
                })
                .collect()
        }
        CostKind::AdversarialDrift { flips } => {
            let base = random_table(shape, rng);
            let flipped: Vec<f64> = base.iter().map(|x| 1.0 - x).collect();
            let mut sorted = flips.clone();
            sorted.sort_unstable();
            (1..=episodes)
                .map(|k| {
                    let passed = sorted.iter().filter(|&&f| f <= k).count();
                    if passed % 2 == 0 { base.clone() } else { flipped.clone() }
                })
                .collect()
        }
        CostKind::Zero {} => vec![vec![0.0; shape.pair_len()]; episodes],
    };
    tables
        .into_iter()
        .map(|t| CostFunction::new(SaTable::from_vec(shape, t)?))
        .collect()
}

/// Costs `c_h(s,a) = φ_h(s,a)ᵀ w_h` with weight vectors `w_h ∈ [0,1]^n` drawn
/// by `kind` over `n` pseudo-actions. Keeps Q-functions linear in `φ` for
/// low-rank environments.
pub fn make_linear_costs(
    kind: &CostKind,
    features: &FeatureMap,
    episodes: usize,
    rng: &mut SimRng,
) -> Result<Vec<CostFunction>> {
    let shape = features.shape();
    let weight_shape = Shape::new(1, features.dim(), shape.horizon)?;
    let weights = make_costs(kind, weight_shape, episodes, rng)?;
    weights
        .iter()
        .map(|w| {
            let mut table = SaTable::zeros(shape);
            for h in 0..shape.horizon {
                let wh = w.table().row(h, 0);
                for s in 0..shape.states {
                    for a in 0..shape.actions {
                        let c: f64 = features.phi(h, s, a).iter().zip(wh).map(|(x, y)| x * y).sum();
                        table.set(h, s, a, c.clamp(0.0, 1.0));
                    }
                }
            }
            CostFunction::new(table)
        })
        .collect()
}

/// Random policy with every row drawn uniformly from the simplex.
pub fn random_policy(shape: Shape, rng: &mut SimRng) -> crate::env::Policy {
    let mut table = SaTable::zeros(shape);
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            let row = table.row_mut(h, s);
            for x in row.iter_mut() {
                *x = -(1.0 - rng.random::<f64>()).ln();
            }
            let total: f64 = row.iter().sum();
            for x in row.iter_mut() {
                *x /= total;
            }
        }
    }
    crate::env::Policy::new(table).expect("normalized rows")
}
