use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::features::LinearQEnv;
use super::resampling::SigmaPlus;
use crate::dapo::RatioTable;
use crate::env::{evaluate_table, Policy, SaTable, StateTable};
use crate::error::{Error, Result};
use crate::rng::{categorical, SimRng};

/// Largest negative `φᵀΣ̂⁺φ` treated as rounding and clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Scales of the six local bonus terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BonusCoefficients {
    pub beta_1: f64,
    pub beta_2: f64,
    pub beta_r: f64,
    pub beta_v: f64,
    pub beta_f: f64,
    pub beta_g: f64,
}

impl BonusCoefficients {
    /// `β₁ = β₂ = H√(γn)`, `β_r = 2H√n`, `β_v = 4ηH²`, `β_f = β_g = γH`.
    pub fn defaults(horizon: usize, dim: usize, gamma: f64, eta: f64) -> Self {
        let (h, n) = (horizon as f64, dim as f64);
        Self {
            beta_1: h * (gamma * n).sqrt(),
            beta_2: h * (gamma * n).sqrt(),
            beta_r: 2.0 * h * n.sqrt(),
            beta_v: 4.0 * eta * h * h,
            beta_f: gamma * h,
            beta_g: gamma * h,
        }
    }
}

/// `φᵀ A φ`, with small negative values clamped to zero.
pub fn sigma_norm_sq(a: &DMatrix<f64>, phi: &[f64]) -> Result<f64> {
    let v = DVector::from_column_slice(phi);
    let x = v.dot(&(a * &v));
    if x < -PSD_TOL {
        return Err(Error::Numeric(format!("inverse-covariance estimate is not PSD: φᵀΣ̂⁺φ = {x}")));
    }
    Ok(x.max(0.0))
}

/// The six local bonus terms of one arrival.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBonusTerms {
    pub one: StateTable,
    pub two: SaTable,
    pub variance: StateTable,
    pub ratio: SaTable,
    pub f: StateTable,
    pub g: SaTable,
}

impl LinearBonusTerms {
    /// `b(s,a) = b¹(s) + b²(s,a) + bᵛ(s) + bʳ(s,a) + bᶠ(s) + bᵍ(s,a)`.
    pub fn total(&self) -> SaTable {
        let shape = self.two.shape();
        let mut out = SaTable::zeros(shape);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    out.set(
                        h,
                        s,
                        a,
                        self.one.get(h, s)
                            + self.two.get(h, s, a)
                            + self.variance.get(h, s)
                            + self.ratio.get(h, s, a)
                            + self.f.get(h, s)
                            + self.g.get(h, s, a),
                    );
                }
            }
        }
        out
    }

    pub fn min_term(&self) -> f64 {
        [
            self.one.as_slice(),
            self.two.as_slice(),
            self.variance.as_slice(),
            self.ratio.as_slice(),
            self.f.as_slice(),
            self.g.as_slice(),
        ]
        .iter()
        .flat_map(|t| t.iter().copied())
        .fold(f64::INFINITY, f64::min)
    }
}

/// Local bonuses for one arrival, with `m` the number of arrivals in the
/// same drain and `π^now` the policy being updated.
pub fn local_bonuses_linear<E: LinearQEnv + ?Sized>(
    r: &RatioTable,
    pi_now: &Policy,
    arrivals: usize,
    env: &E,
    sigma_plus: &SigmaPlus,
    coeffs: &BonusCoefficients,
) -> Result<LinearBonusTerms> {
    let shape = pi_now.shape();
    let features = env.features();
    let m = arrivals as f64;
    let mut terms = LinearBonusTerms {
        one: StateTable::zeros(shape),
        two: SaTable::zeros(shape),
        variance: StateTable::zeros(shape),
        ratio: SaTable::zeros(shape),
        f: StateTable::zeros(shape),
        g: SaTable::zeros(shape),
    };
    for h in 0..shape.horizon {
        let sp = sigma_plus.step(h);
        for s in 0..shape.states {
            let (mut one, mut var, mut f) = (0.0, 0.0, 0.0);
            for a in 0..shape.actions {
                let sq = sigma_norm_sq(sp, features.phi(h, s, a))?;
                let norm = sq.sqrt();
                let ra = r.get(h, s, a);
                let w = ra * pi_now.prob(h, s, a);
                one += w * norm;
                var += w * sq;
                f += w * sq;
                terms.two.set(h, s, a, coeffs.beta_2 * ra * norm);
                terms.ratio.set(h, s, a, coeffs.beta_r * (1.0 - ra));
                terms.g.set(h, s, a, coeffs.beta_g * ra * sq);
            }
            terms.one.set(h, s, coeffs.beta_1 * one);
            terms.variance.set(h, s, coeffs.beta_v * m * var);
            terms.f.set(h, s, coeffs.beta_f * f);
        }
    }
    Ok(terms)
}

/// How propagated bonuses are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BonusMode {
    /// One simulator transition per uncached `(h, s, a)`.
    #[default]
    Sampled,
    /// Exact Bellman propagation through the known kernel (test instances).
    Exact,
}

/// Simulator calls shared by every bonus evaluation of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatorBudget {
    limit: Option<u64>,
    used: u64,
}

impl SimulatorBudget {
    pub fn new(limit: Option<u64>) -> Self {
        Self { limit, used: 0 }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    fn charge(&mut self) -> Result<()> {
        if let Some(limit) = self.limit {
            if self.used >= limit {
                return Err(Error::Resource(format!(
                    "bonus procedure exhausted its budget of {limit} simulator calls"
                )));
            }
        }
        self.used += 1;
        Ok(())
    }
}

/// Memoized Monte-Carlo estimate `B̂_h(s,a)` for one arrival.
#[derive(Debug)]
pub struct BonusProcedure<'a> {
    local: &'a SaTable,
    pi_source: &'a Policy,
    cache: HashMap<(usize, usize, usize), f64>,
}

impl<'a> BonusProcedure<'a> {
    pub fn new(local: &'a SaTable, pi_source: &'a Policy) -> Self {
        Self { local, pi_source, cache: HashMap::new() }
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// `b_h(s,a) + B̂_{h+1}(s', a')` with `s' ∼ p_h(·|s,a)` from the simulator
    /// and `a' ∼ π^j_{h+1}(·|s')`. Repeated keys return the stored value.
    pub fn value<E: LinearQEnv + ?Sized>(
        &mut self,
        h: usize,
        s: usize,
        a: usize,
        env: &E,
        budget: &mut SimulatorBudget,
        rng: &mut SimRng,
    ) -> Result<f64> {
        if let Some(&v) = self.cache.get(&(h, s, a)) {
            return Ok(v);
        }
        let horizon = self.local.shape().horizon;
        let mut v = self.local.get(h, s, a);
        if h + 1 < horizon {
            budget.charge()?;
            let next = env.simulate_step(h, s, a, rng);
            let action = categorical(rng, self.pi_source.dist(h + 1, next));
            v += self.value(h + 1, next, action, env, budget, rng)?;
        }
        self.cache.insert((h, s, a), v);
        Ok(v)
    }
}

/// `B̂` for every `(h, s, a)` of a finite state space.
pub fn propagate_bonus<E: LinearQEnv + ?Sized>(
    local: &SaTable,
    pi_source: &Policy,
    env: &E,
    mode: BonusMode,
    budget: &mut SimulatorBudget,
    rng: &mut SimRng,
) -> Result<SaTable> {
    let shape = local.shape();
    match mode {
        BonusMode::Exact => {
            let mdp = env
                .exact_model()
                .ok_or_else(|| Error::Config("exact bonus mode needs a known kernel".into()))?;
            Ok(evaluate_table(mdp, pi_source, local)?.q)
        }
        BonusMode::Sampled => {
            let mut procedure = BonusProcedure::new(local, pi_source);
            let mut out = SaTable::zeros(shape);
            for h in 0..shape.horizon {
                for s in 0..shape.states {
                    for a in 0..shape.actions {
                        out.set(h, s, a, procedure.value(h, s, a, env, budget, rng)?);
                    }
                }
            }
            Ok(out)
        }
    }
}
