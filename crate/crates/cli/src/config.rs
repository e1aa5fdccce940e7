//! JSON run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use delaypo_core::dapo::linear::{BonusMode, CovarianceMode, LinearGammaPreset};
use delaypo_core::dapo::unknown::UnknownRatePreset;
use delaypo_core::{BaselineKind, CostKind, DelayKind, EnvKind, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    DapoKnown,
    DapoUnknown,
    DapoLinear,
    Baseline(BaselineKind),
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dapo_known" => Ok(Algorithm::DapoKnown),
            "dapo_unknown" => Ok(Algorithm::DapoUnknown),
            "dapo_linear" => Ok(Algorithm::DapoLinear),
            _ => {
                let name = s
                    .strip_prefix("baseline:")
                    .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))?;
                BaselineKind::ALL
                    .into_iter()
                    .find(|k| k.name() == name)
                    .map(Algorithm::Baseline)
                    .ok_or_else(|| Error::Config(format!("unknown baseline `{name}`")))
            }
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::DapoKnown => f.write_str("dapo_known"),
            Algorithm::DapoUnknown => f.write_str("dapo_unknown"),
            Algorithm::DapoLinear => f.write_str("dapo_linear"),
            Algorithm::Baseline(k) => write!(f, "baseline:{}", k.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Statement,
    Analysis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sampled,
    Exact,
}

/// Optional replacements for tuned hyperparameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub skip_beta: Option<f64>,
    /// Rate formula variant for the unknown-kernel and linear learners.
    pub preset: Option<Preset>,
    pub reps: Option<u64>,
    pub depth: Option<usize>,
    pub bonus_budget: Option<u64>,
    pub covariance: Option<Mode>,
    pub bonus_mode: Option<Mode>,
    pub enforce_hedge_precondition: Option<bool>,
}

impl Overrides {
    pub fn unknown_preset(&self) -> UnknownRatePreset {
        match self.preset.unwrap_or_default() {
            Preset::Statement => UnknownRatePreset::Statement,
            Preset::Analysis => UnknownRatePreset::Analysis,
        }
    }

    pub fn linear_preset(&self) -> LinearGammaPreset {
        match self.preset.unwrap_or_default() {
            Preset::Statement => LinearGammaPreset::Statement,
            Preset::Analysis => LinearGammaPreset::Analysis,
        }
    }

    pub fn covariance_mode(&self) -> Option<CovarianceMode> {
        self.covariance.map(|m| match m {
            Mode::Sampled => CovarianceMode::Sampled,
            Mode::Exact => CovarianceMode::Exact,
        })
    }

    pub fn bonus_mode(&self) -> Option<BonusMode> {
        self.bonus_mode.map(|m| match m {
            Mode::Sampled => BonusMode::Sampled,
            Mode::Exact => BonusMode::Exact,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvKind,
    pub costs: CostKind,
    pub delays: DelayKind,
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for name in ["dapo_known", "dapo_unknown", "dapo_linear", "baseline:naive_delayed_po", "baseline:uniform_random"]
        {
            assert_eq!(name.parse::<Algorithm>().unwrap().to_string(), name);
        }
        assert!("baseline:oreps".parse::<Algorithm>().is_err());
        assert!("ppo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"env":{"kind":"random_tabular","states":2,"actions":2,"horizon":2},
            "costs":{"kind":"zero"},"delays":{"kind":"constant","delay":0},
            "algorithm":"dapo_known","episodes":3,"seeds":[1],"colour":"red"}"#;
        assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn zero_episodes_are_rejected() {
        let text = r#"{"env":{"kind":"random_tabular","states":2,"actions":2,"horizon":2},
            "costs":{"kind":"zero"},"delays":{"kind":"constant","delay":0},
            "algorithm":"dapo_known","episodes":0,"seeds":[1]}"#;
        assert!(RunConfig::from_json(text).is_err());
    }
}
