use rand::Rng;

use crate::env::{Shape, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::SimRng;

const NORM_TOL: f64 = 1e-12;

/// Known feature vectors `φ_h(s, a) ∈ R^n` with `‖φ‖₂ ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    shape: Shape,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    /// `data` is laid out as `[h][s][a][i]`.
    pub fn new(shape: Shape, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be positive".into()));
        }
        if data.len() != shape.pair_len() * dim {
            return Err(Error::Shape(format!(
                "expected {} feature entries, got {}",
                shape.pair_len() * dim,
                data.len()
            )));
        }
        for (i, chunk) in data.chunks(dim).enumerate() {
            let norm = chunk.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > 1.0 + NORM_TOL {
                return Err(Error::Structural(format!("feature {i} has norm {norm} > 1")));
            }
        }
        Ok(Self { shape, dim, data })
    }

    /// Indicator features over `(s, a)`, shared across steps.
    pub fn one_hot(shape: Shape) -> Self {
        let dim = shape.states * shape.actions;
        let mut data = vec![0.0; shape.pair_len() * dim];
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    data[shape.pair_index(h, s, a) * dim + s * shape.actions + a] = 1.0;
                }
            }
        }
        Self { shape, dim, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phi(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.shape.pair_index(h, s, a) * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// An episodic environment with known features and a simulator.
pub trait LinearQEnv: Sync {
    fn features(&self) -> &FeatureMap;

    fn initial_state(&self) -> usize;

    /// Draw `s' ∼ p_h(· | s, a)` for `h < H − 1`.
    fn simulate_step(&self, h: usize, s: usize, a: usize, rng: &mut SimRng) -> usize;

    /// The exact kernel, when the environment exposes one.
    fn exact_model(&self) -> Option<&TabularMdp>;

    fn shape(&self) -> Shape {
        self.features().shape()
    }
}

/// A tabular MDP together with a feature map under which its Q-functions are linear.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizedMdp {
    mdp: TabularMdp,
    features: FeatureMap,
}

impl FeaturizedMdp {
    pub fn new(mdp: TabularMdp, features: FeatureMap) -> Result<Self> {
        mdp.shape().ensure_eq(&features.shape(), "features")?;
        Ok(Self { mdp, features })
    }

    pub fn one_hot(mdp: TabularMdp) -> Self {
        let features = FeatureMap::one_hot(mdp.shape());
        Self { mdp, features }
    }

    /// Random low-rank MDP: every `φ_h(s,a)` is a probability vector over `n`
    /// latent factors, each factor `μ_h(i, ·)` is a distribution over next
    /// states, and `p_h(·|s,a) = Σ_i φ_i μ_h(i, ·)`. Costs of the form
    /// `φᵀw` with `w ∈ [0,1]^n` then keep every Q-function linear in `φ`.
    pub fn random_low_rank(shape: Shape, dim: usize, initial_state: usize, rng: &mut SimRng) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be positive".into()));
        }
        let mut phi = Vec::with_capacity(shape.pair_len() * dim);
        for _ in 0..shape.pair_len() {
            let w: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            phi.extend(w.iter().map(|x| x / total));
        }
        let layers = shape.horizon.saturating_sub(1);
        let mut mu = Vec::with_capacity(layers * dim * shape.states);
        for _ in 0..layers * dim {
            let w: Vec<f64> = (0..shape.states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = w.iter().sum();
            mu.extend(w.iter().map(|x| x / total));
        }
        let mut kernel = vec![0.0; layers * shape.states * shape.actions * shape.states];
        for h in 0..layers {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    let pair = shape.pair_index(h, s, a);
                    let f = &phi[pair * dim..(pair + 1) * dim];
                    let out = &mut kernel[pair * shape.states..(pair + 1) * shape.states];
                    for (i, &fi) in f.iter().enumerate() {
                        let m = &mu[(h * dim + i) * shape.states..(h * dim + i + 1) * shape.states];
                        for (o, &mi) in out.iter_mut().zip(m) {
                            *o += fi * mi;
                        }
                    }
                }
            }
        }
        let mdp = TabularMdp::from_weights(shape, initial_state, kernel)?;
        let features = FeatureMap::new(shape, dim, phi)?;
        Ok(Self { mdp, features })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }
}

impl LinearQEnv for FeaturizedMdp {
    fn features(&self) -> &FeatureMap {
        &self.features
    }

    fn initial_state(&self) -> usize {
        self.mdp.initial_state()
    }

    fn simulate_step(&self, h: usize, s: usize, a: usize, rng: &mut SimRng) -> usize {
        crate::rng::categorical(rng, self.mdp.next(h, s, a))
    }

    fn exact_model(&self) -> Option<&TabularMdp> {
        Some(&self.mdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn one_hot_features_are_unit_vectors() {
        let shape = Shape::new(2, 3, 2).unwrap();
        let map = FeatureMap::one_hot(shape);
        assert_eq!(map.dim(), 6);
        let phi = map.phi(1, 1, 2);
        assert_eq!(phi.iter().sum::<f64>(), 1.0);
        assert_eq!(phi[5], 1.0);
    }

    #[test]
    fn oversized_features_are_rejected() {
        let shape = Shape::new(1, 1, 1).unwrap();
        assert!(FeatureMap::new(shape, 2, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn low_rank_kernel_factorizes() {
        let shape = Shape::new(3, 2, 3).unwrap();
        let env = FeaturizedMdp::random_low_rank(shape, 2, 0, &mut rng::stream(5, 0)).unwrap();
        for h in 0..2 {
            for s in 0..3 {
                let total: f64 = env.mdp().next(h, s, 0).iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(env.features().phi(h, s, 1).iter().all(|&x| x >= 0.0));
            }
        }
    }
}
