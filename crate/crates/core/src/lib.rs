//! Policy optimization for episodic adversarial MDPs with delayed bandit feedback.
//!
//! The crate provides a tabular environment model, delay schedules and a
//! feedback buffer, a delayed exponential-weights learner, delay-adapted
//! policy-optimization learners for known kernels, unknown kernels and linear
//! Q-functions, plus reference baselines and instance generators.

pub mod baselines;
pub mod dapo;
pub mod delay;
pub mod env;
pub mod error;
pub mod hedge;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scenario;

pub use baselines::{run_baseline, BaselineKind};
pub use dapo::known::DapoKnownConfig;
pub use dapo::linear::{FeatureMap, FeaturizedMdp, LinearConfig, LinearQEnv};
pub use dapo::unknown::DapoUnknownConfig;
pub use dapo::{RunDiagnostics, RunOutput};
pub use delay::{DelayKind, DelaySchedule, FeedbackBuffer};
pub use env::{CostFunction, Policy, SaTable, Shape, StateTable, TabularMdp, Trajectory};
pub use error::{Error, Result};
pub use report::RegretReport;
pub use rng::SimRng;
pub use scenario::{CostKind, EnvKind};
