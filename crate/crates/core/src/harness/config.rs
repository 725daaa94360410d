use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::EvalConfig;
use crate::environment::ScenarioConfig;
use crate::error::{config, Result};
use crate::qlearning::TrainConfig;

/// Everything one experiment needs, read from a TOML file with sections
/// `[scenario]`, `[train]` and `[eval]`. Missing fields keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::StartSpec;
    use crate::qlearning::EpsilonSchedule;
    use crate::scoring::RewardKind;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn partial_overrides() {
        let text = r#"
[scenario]
ensemble_size = 50

[scenario.plume]
wind_direction_deg = 90.0
stability_class = 4

[train]
episodes = 1000
reward_kind = "kl"
schedule = { kind = "exponential", decay_fraction = 0.5 }

[eval]
n_flights = 10
starts = ["upwind", "0,3"]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.scenario.ensemble_size, 50);
        assert_eq!(cfg.scenario.plume.wind_direction_deg, 90.0);
        assert_eq!(cfg.scenario.plume.stability_class.get(), 4);
        assert_eq!(cfg.scenario.grid_nx, 10);
        assert_eq!(cfg.train.episodes, 1000);
        assert_eq!(cfg.train.reward_kind, RewardKind::KlGain);
        assert_eq!(cfg.train.schedule, EpsilonSchedule::Exponential { decay_fraction: 0.5 });
        assert_eq!(cfg.eval.starts, vec![StartSpec::Upwind, StartSpec::Cell(0, 3)]);
    }

    #[test]
    fn round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.checkpoint_every = Some(500);
        cfg.eval.workers = Some(3);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(ExperimentConfig::from_toml("[scenario.plume]\nstability_class = 7\n").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nalpha = 0.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[eval]\nn_flights = 0\n").is_err());
        assert!(ExperimentConfig::from_toml("[scenario]\nbogus = 1\nensemble_size = \"x\"\n").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ExperimentConfig::load("/nonexistent/experiment.toml").unwrap_err();
        assert!(matches!(err, crate::Error::Io(_)));
    }
}
