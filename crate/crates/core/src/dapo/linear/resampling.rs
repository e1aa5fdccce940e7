use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngCore, SeedableRng};
use rayon::prelude::*;

use super::features::LinearQEnv;
use crate::env::{occupancy, Policy};
use crate::error::{Error, Result};
use crate::rng::{categorical, SimRng};

/// Step size of the truncated Neumann series. Valid while `γ + ‖φ‖² ≤ 2`.
pub const NEUMANN_STEP: f64 = 0.5;

/// Repetitions handled by one independently seeded generator.
const CHUNK: usize = 64;

/// Per-step inverse-covariance estimates `Σ̂⁺_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaPlus {
    mats: Vec<DMatrix<f64>>,
}

impl SigmaPlus {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Self {
        Self { mats }
    }

    pub fn step(&self, h: usize) -> &DMatrix<f64> {
        &self.mats[h]
    }

    pub fn horizon(&self) -> usize {
        self.mats.len()
    }

    pub fn max_op_norm(&self) -> f64 {
        self.mats.iter().map(op_norm).fold(0.0, f64::max)
    }
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Repetition count and series depth
/// `M = ⌈24/(γ²ε²) · ln(10H²Kn/δ)⌉`, `N = ⌈(2/γ) ln(1/(εγ))⌉`.
pub fn resampling_parameters(gamma: f64, eps: f64, delta: f64, horizon: usize, episodes: usize, dim: usize) -> (u64, usize) {
    let log = (10.0 * (horizon * horizon * episodes * dim) as f64 / delta).ln();
    let reps = (24.0 / (gamma * gamma * eps * eps) * log).ceil();
    (reps.min(u64::MAX as f64) as u64, series_depth(gamma, eps))
}

/// `N = ⌈(2/γ) ln(1/(εγ))⌉`, at least 1.
pub fn series_depth(gamma: f64, eps: f64) -> usize {
    ((2.0 / gamma) * (1.0 / (eps * gamma)).ln()).ceil().max(1.0) as usize
}

/// `Σ_h = E_{(s,a) ∼ q^π_h}[φφᵀ]` from the exact kernel.
pub fn exact_covariance<E: LinearQEnv + ?Sized>(env: &E, policy: &Policy) -> Result<Vec<DMatrix<f64>>> {
    let mdp = env
        .exact_model()
        .ok_or_else(|| Error::Config("exact covariance needs an environment with a known kernel".into()))?;
    let q = occupancy(mdp, policy)?;
    let shape = mdp.shape();
    let n = env.features().dim();
    let mut out = Vec::with_capacity(shape.horizon);
    for h in 0..shape.horizon {
        let mut sigma = DMatrix::zeros(n, n);
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let w = q.pair(h, s, a);
                if w > 0.0 {
                    let phi = nalgebra::DVector::from_column_slice(env.features().phi(h, s, a));
                    sigma += w * &phi * phi.transpose();
                }
            }
        }
        out.push(sigma);
    }
    Ok(out)
}

/// `(γI + Σ_h)^{-1}` per step.
pub fn exact_inverse_covariance<E: LinearQEnv + ?Sized>(env: &E, policy: &Policy, gamma: f64) -> Result<SigmaPlus> {
    let n = env.features().dim();
    let mats = exact_covariance(env, policy)?
        .into_iter()
        .map(|sigma| {
            (DMatrix::identity(n, n) * gamma + sigma)
                .try_inverse()
                .ok_or_else(|| Error::Numeric("regularized covariance is singular".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaPlus { mats })
}

/// Matrix Geometric Resampling with `reps · depth` simulated trajectories of `policy`.
///
/// One repetition runs `depth` trajectories; trajectory `i` contributes the
/// outer product `W_i = φφᵀ` at every step `h`, and the repetition returns
/// `β Σ_{i=0}^{N} Π_{j≤i} (I − β(γI + W_j))`. Repetitions are averaged,
/// symmetrized and spectrally clipped to `[0, 1/γ]`.
///
/// Repetitions are split into fixed chunks, each seeded from one draw of
/// `rng`, so the result does not depend on the thread count.
pub fn geometric_resampling<E: LinearQEnv + ?Sized>(
    env: &E,
    policy: &Policy,
    reps: u64,
    depth: usize,
    gamma: f64,
    rng: &mut SimRng,
) -> Result<SigmaPlus> {
    if reps == 0 || depth == 0 {
        return Err(Error::Config("geometric resampling needs at least one repetition and one trajectory".into()));
    }
    if !(gamma > 0.0 && gamma + 1.0 <= 1.0 / NEUMANN_STEP) {
        return Err(Error::Config(format!("gamma must lie in (0, 1] for resampling, got {gamma}")));
    }
    let shape = env.shape();
    shape.ensure_eq(&policy.shape(), "policy")?;
    let n = env.features().dim();
    let base = rng.next_u64();
    let chunks = reps.div_ceil(CHUNK as u64);
    let partials: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut local = SimRng::seed_from_u64(base);
            local.set_stream(c);
            let count = (reps - c * CHUNK as u64).min(CHUNK as u64);
            let mut acc = vec![vec![0.0; n * n]; shape.horizon];
            let mut work = Workspace::new(shape.horizon, n);
            for _ in 0..count {
                work.repetition(env, policy, depth, gamma, &mut local);
                for (a, s) in acc.iter_mut().zip(&work.sum) {
                    for (x, y) in a.iter_mut().zip(s) {
                        *x += y;
                    }
                }
            }
            acc
        })
        .collect();
    let mut mats = Vec::with_capacity(shape.horizon);
    for h in 0..shape.horizon {
        let mut total = vec![0.0; n * n];
        for part in &partials {
            for (x, y) in total.iter_mut().zip(&part[h]) {
                *x += y;
            }
        }
        let mean = DMatrix::from_row_slice(n, n, &total) / reps as f64;
        mats.push(clip_spectrum(&mean, 1.0 / gamma)?);
    }
    Ok(SigmaPlus { mats })
}

/// Symmetrize, then clip eigenvalues into `[0, cap]`.
pub fn clip_spectrum(m: &DMatrix<f64>, cap: f64) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    if !sym.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("non-finite inverse-covariance estimate".into()));
    }
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        *v = v.clamp(0.0, cap);
    }
    let out = eig.recompose();
    Ok((&out + out.transpose()) * 0.5)
}

struct Workspace {
    n: usize,
    product: Vec<Vec<f64>>,
    sum: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    phis: Vec<usize>,
}

impl Workspace {
    fn new(horizon: usize, n: usize) -> Self {
        Self {
            n,
            product: vec![vec![0.0; n * n]; horizon],
            sum: vec![vec![0.0; n * n]; horizon],
            scratch: vec![0.0; n],
            phis: vec![0; horizon * 2],
        }
    }

    fn repetition<E: LinearQEnv + ?Sized>(&mut self, env: &E, policy: &Policy, depth: usize, gamma: f64, rng: &mut SimRng) {
        let n = self.n;
        let horizon = self.product.len();
        for h in 0..horizon {
            let (p, s) = (&mut self.product[h], &mut self.sum[h]);
            p.fill(0.0);
            s.fill(0.0);
            for i in 0..n {
                p[i * n + i] = 1.0;
                s[i * n + i] = NEUMANN_STEP;
            }
        }
        let decay = 1.0 - NEUMANN_STEP * gamma;
        for _ in 0..depth {
            let mut state = env.initial_state();
            for h in 0..horizon {
                let action = categorical(rng, policy.dist(h, state));
                self.phis[2 * h] = state;
                self.phis[2 * h + 1] = action;
                if h + 1 < horizon {
                    state = env.simulate_step(h, state, action, rng);
                }
            }
            for h in 0..horizon {
                let phi = env.features().phi(h, self.phis[2 * h], self.phis[2 * h + 1]);
                let (p, s) = (&mut self.product[h], &mut self.sum[h]);
                for (i, out) in self.scratch.iter_mut().enumerate() {
                    *out = p[i * n..(i + 1) * n].iter().zip(phi).map(|(x, y)| x * y).sum();
                }
                for i in 0..n {
                    let vi = NEUMANN_STEP * self.scratch[i];
                    let row = &mut p[i * n..(i + 1) * n];
                    for (x, f) in row.iter_mut().zip(phi) {
                        *x = decay * *x - vi * f;
                    }
                }
                for (x, y) in s.iter_mut().zip(p.iter()) {
                    *x += NEUMANN_STEP * y;
                }
            }
        }
    }
}
