//! Finite-horizon tabular MDPs: the model types, exact planning and evaluation,
//! and episode sampling.
//!
//! Steps are 0-based internally (`h ∈ 0..H`). Step `H - 1` has no transition.

mod io;
mod planning;

pub use io::EnvDocument;
pub(crate) use planning::dot as planning_dot;
pub use planning::{
    best_in_hindsight, evaluate, evaluate_table, occupancy, sample_episode,
    value_difference_check,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// Sizes shared by every table over `(h, s, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Shape {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::Shape(format!(
                "S, A, H must be positive (got S={states}, A={actions}, H={horizon})"
            )));
        }
        Ok(Self { states, actions, horizon })
    }

    #[inline]
    pub fn pair_index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    #[inline]
    pub fn state_index(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    pub fn pair_len(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    pub fn state_len(&self) -> usize {
        self.horizon * self.states
    }

    pub(crate) fn ensure_eq(&self, other: &Shape, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("{what}: expected {self:?}, got {other:?}")));
        }
        Ok(())
    }
}

/// Dense real table indexed by `(h, s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaTable {
    shape: Shape,
    data: Vec<f64>,
}

impl SaTable {
    pub fn zeros(shape: Shape) -> Self {
        Self { shape, data: vec![0.0; shape.pair_len()] }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self { shape, data: vec![value; shape.pair_len()] }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.pair_len() {
            return Err(Error::Shape(format!(
                "table of {} entries for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.data[self.shape.pair_index(h, s, a)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, a: usize, value: f64) {
        let i = self.shape.pair_index(h, s, a);
        self.data[i] = value;
    }

    /// The action row at `(h, s)`.
    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.shape.pair_index(h, s, 0);
        &self.data[start..start + self.shape.actions]
    }

    #[inline]
    pub fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let start = self.shape.pair_index(h, s, 0);
        &mut self.data[start..start + self.shape.actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SaTable, beta: f64) -> Result<SaTable> {
        self.shape.ensure_eq(&other.shape, "combine")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        Ok(SaTable { shape: self.shape, data })
    }
}

/// Dense real table indexed by `(h, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTable {
    shape: Shape,
    data: Vec<f64>,
}

impl StateTable {
    pub fn zeros(shape: Shape) -> Self {
        Self { shape, data: vec![0.0; shape.state_len()] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.data[self.shape.state_index(h, s)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, value: f64) {
        let i = self.shape.state_index(h, s);
        self.data[i] = value;
    }

    /// Values of all states at step `h`.
    pub fn layer(&self, h: usize) -> &[f64] {
        let start = self.shape.state_index(h, 0);
        &self.data[start..start + self.shape.states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Structural(format!("{what}: negative or non-finite entry in {v:?}")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Structural(format!("{what}: entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Divide a non-negative weight vector by its sum.
pub fn normalize(weights: &mut [f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Numeric(format!("cannot normalize weights summing to {sum}")));
    }
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(())
}

/// A finite layered MDP with a step-indexed transition kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    shape: Shape,
    initial_state: usize,
    // (H - 1) x S x A x S
    transition: Vec<f64>,
}

impl TabularMdp {
    /// Build from a flat `(H-1) x S x A x S` kernel. Every next-state vector
    /// must already be a probability vector; no renormalization happens here.
    pub fn new(shape: Shape, initial_state: usize, transition: Vec<f64>) -> Result<Self> {
        let expected = shape.horizon.saturating_sub(1) * shape.states * shape.actions * shape.states;
        if transition.len() != expected {
            return Err(Error::Shape(format!(
                "kernel has {} entries, expected {expected}",
                transition.len()
            )));
        }
        if initial_state >= shape.states {
            return Err(Error::Shape(format!(
                "initial state {initial_state} out of range for S={}",
                shape.states
            )));
        }
        let mdp = Self { shape, initial_state, transition };
        for h in 0..shape.horizon.saturating_sub(1) {
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    check_distribution(mdp.next(h, s, a), &format!("p[{h}][{s}][{a}]"))?;
                }
            }
        }
        Ok(mdp)
    }

    /// Build from non-negative weights, normalizing each next-state vector.
    pub fn from_weights(shape: Shape, initial_state: usize, mut weights: Vec<f64>) -> Result<Self> {
        let s = shape.states;
        for chunk in weights.chunks_mut(s) {
            normalize(chunk)?;
        }
        Self::new(shape, initial_state, weights)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn num_states(&self) -> usize {
        self.shape.states
    }

    pub fn num_actions(&self) -> usize {
        self.shape.actions
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// `p_h(· | s, a)` for `h < H - 1`.
    #[inline]
    pub fn next(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.shape.states;
        let start = ((h * n + s) * self.shape.actions + a) * n;
        &self.transition[start..start + n]
    }

    pub fn kernel(&self) -> &[f64] {
        &self.transition
    }
}

/// Per-episode cost function with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostFunction(SaTable);

impl CostFunction {
    pub fn new(table: SaTable) -> Result<Self> {
        if let Some(bad) = table.as_slice().iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Structural(format!("cost {bad} outside [0, 1]")));
        }
        Ok(Self(table))
    }

    pub fn zeros(shape: Shape) -> Self {
        Self(SaTable::zeros(shape))
    }

    pub fn shape(&self) -> Shape {
        self.0.shape()
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.0.get(h, s, a)
    }

    pub fn table(&self) -> &SaTable {
        &self.0
    }
}

/// Stochastic Markov policy `π_h(· | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy(SaTable);

impl Policy {
    pub fn new(table: SaTable) -> Result<Self> {
        let shape = table.shape();
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                check_distribution(table.row(h, s), &format!("pi[{h}][{s}]"))?;
            }
        }
        Ok(Self(table))
    }

    pub fn uniform(shape: Shape) -> Self {
        Self(SaTable::filled(shape, 1.0 / shape.actions as f64))
    }

    /// Deterministic policy from one action per `(h, s)`, row-major.
    pub fn deterministic(shape: Shape, choices: &[usize]) -> Result<Self> {
        if choices.len() != shape.state_len() {
            return Err(Error::Shape(format!(
                "{} choices for {} (h, s) pairs",
                choices.len(),
                shape.state_len()
            )));
        }
        let mut table = SaTable::zeros(shape);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                let a = choices[shape.state_index(h, s)];
                if a >= shape.actions {
                    return Err(Error::Shape(format!("action {a} out of range")));
                }
                table.set(h, s, a, 1.0);
            }
        }
        Ok(Self(table))
    }

    pub fn shape(&self) -> Shape {
        self.0.shape()
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.0.get(h, s, a)
    }

    #[inline]
    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        self.0.row(h, s)
    }

    pub(crate) fn dist_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        self.0.row_mut(h, s)
    }

    pub fn table(&self) -> &SaTable {
        &self.0
    }
}

/// One realized episode under bandit feedback.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Costs observed at the visited pairs only.
    pub costs: Vec<f64>,
    /// `L[h] = Σ_{h' ≥ h} costs[h']`, with `L[H] = 0`.
    pub cost_to_go: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: Vec<usize>, actions: Vec<usize>, costs: Vec<f64>) -> Self {
        let mut cost_to_go = vec![0.0; costs.len() + 1];
        for h in (0..costs.len()).rev() {
            cost_to_go[h] = cost_to_go[h + 1] + costs[h];
        }
        Self { states, actions, costs, cost_to_go }
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn visited(&self, h: usize, s: usize, a: usize) -> bool {
        self.states[h] == s && self.actions[h] == a
    }

    pub fn total_cost(&self) -> f64 {
        self.cost_to_go[0]
    }
}

/// `V^π` and `Q^π` for one cost function.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTables {
    pub v: StateTable,
    pub q: SaTable,
}

impl ValueTables {
    /// `V_1(s_init)`.
    pub fn initial_value(&self, mdp: &TabularMdp) -> f64 {
        self.v.get(0, mdp.initial_state())
    }
}

/// State-action occupancy `q^π_h(s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    pairs: SaTable,
    states: StateTable,
}

impl OccupancyMeasure {
    pub(crate) fn new(pairs: SaTable) -> Self {
        let shape = pairs.shape();
        let mut states = StateTable::zeros(shape);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                states.set(h, s, pairs.row(h, s).iter().sum());
            }
        }
        Self { pairs, states }
    }

    pub fn shape(&self) -> Shape {
        self.pairs.shape()
    }

    #[inline]
    pub fn pair(&self, h: usize, s: usize, a: usize) -> f64 {
        self.pairs.get(h, s, a)
    }

    /// Marginal `q_h(s) = Σ_a q_h(s, a)`.
    #[inline]
    pub fn state(&self, h: usize, s: usize) -> f64 {
        self.states.get(h, s)
    }

    pub fn pairs(&self) -> &SaTable {
        &self.pairs
    }

    pub fn states(&self) -> &StateTable {
        &self.states
    }
}
