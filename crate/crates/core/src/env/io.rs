use serde::{Deserialize, Serialize};

use super::{CostFunction, SaTable, Shape, TabularMdp};
use crate::error::{Error, Result};

/// JSON document holding an environment and its cost sequence.
///
/// `p` is nested `(H-1) x S x A x S`, `costs` is `K x H x S x A`. Floats are
/// written in shortest round-trip form and parsed exactly, so
/// serialize → parse reproduces every bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvDocument {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub s_init: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub costs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl EnvDocument {
    pub fn from_parts(mdp: &TabularMdp, costs: &[CostFunction]) -> Self {
        let shape = mdp.shape();
        let layers = shape.horizon.saturating_sub(1);
        let p = (0..layers)
            .map(|h| {
                (0..shape.states)
                    .map(|s| (0..shape.actions).map(|a| mdp.next(h, s, a).to_vec()).collect())
                    .collect()
            })
            .collect();
        let costs = costs
            .iter()
            .map(|c| {
                (0..shape.horizon)
                    .map(|h| {
                        (0..shape.states).map(|s| c.table().row(h, s).to_vec()).collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            states: shape.states,
            actions: shape.actions,
            horizon: shape.horizon,
            s_init: mdp.initial_state(),
            p,
            costs,
        }
    }

    pub fn into_parts(&self) -> Result<(TabularMdp, Vec<CostFunction>)> {
        let shape = Shape::new(self.states, self.actions, self.horizon)?;
        let layers = shape.horizon - 1;
        if self.p.len() != layers {
            return Err(Error::Shape(format!("p has {} layers, expected {layers}", self.p.len())));
        }
        let mut kernel = Vec::with_capacity(layers * shape.states * shape.actions * shape.states);
        for layer in &self.p {
            check_len(layer.len(), shape.states, "p[h]")?;
            for row in layer {
                check_len(row.len(), shape.actions, "p[h][s]")?;
                for dist in row {
                    check_len(dist.len(), shape.states, "p[h][s][a]")?;
                    kernel.extend_from_slice(dist);
                }
            }
        }
        let mdp = TabularMdp::new(shape, self.s_init, kernel)?;
        let costs = self
            .costs
            .iter()
            .map(|episode| {
                check_len(episode.len(), shape.horizon, "costs[k]")?;
                let mut flat = Vec::with_capacity(shape.pair_len());
                for layer in episode {
                    check_len(layer.len(), shape.states, "costs[k][h]")?;
                    for row in layer {
                        check_len(row.len(), shape.actions, "costs[k][h][s]")?;
                        flat.extend_from_slice(row);
                    }
                }
                CostFunction::new(SaTable::from_vec(shape, flat)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((mdp, costs))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}
