//! TOML configuration file shared by the server and the simulator.
//!
//! Every section and key is optional; missing values take their defaults.
//!
//! ```toml
//! [headpose]
//! pitch_threshold_deg = 10.0
//! yaw_threshold_deg = 12.0
//! refractory_ms = 900
//!
//! [evaluation]
//! negative_value = -1.2
//! positive_threshold = 0.2
//!
//! [server]
//! tick_ms = 1000
//!
//! [simulation.sweep]
//! trials_per_case = 1000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::EvaluationParams;
use crate::headpose::HeadPoseConfig;
use crate::simulation::{CohortSpec, SweepConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub tick_ms: u64,
    /// Queued teacher messages before older evaluations are dropped.
    pub teacher_queue: usize,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self { tick_ms: 1000, teacher_queue: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub cohort: CohortSpec,
    pub sweep: SweepConfig,
    /// Confusion table path; the built-in model when absent.
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub headpose: HeadPoseConfig,
    pub evaluation: EvaluationParams,
    pub server: ServerSettings,
    pub simulation: SimulationSettings,
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Config =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.headpose.validate().map_err(|e| invalid(&e))?;
        self.evaluation.validate().map_err(|e| invalid(&e))?;
        self.simulation.cohort.validate().map_err(|e| invalid(&e))?;
        self.simulation.sweep.validate().map_err(|e| invalid(&e))?;
        if self.server.tick_ms == 0 || self.server.teacher_queue == 0 {
            return Err(ConfigError::Invalid("server tick and queue size must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("", Path::new("x.toml")).unwrap(), Config::default());
    }

    #[test]
    fn overrides_apply() {
        let text = r#"
[headpose]
pitch_threshold_deg = 8.5
landmark_indices = [8, 17, 26, 30, 36, 45, 48, 54]
model_points_3d = [
  [0.0, 7.4, -4.1], [-6.8, -6.8, -4.4], [6.8, -6.8, -4.4], [0.0, -2.0, -8.0],
  [-5.3, -5.5, -4.0], [5.3, -5.5, -4.0], [-2.8, 2.1, -5.0], [2.8, 2.1, -5.0],
]

[evaluation]
negative_value = -1.5

[server]
tick_ms = 250

[simulation.sweep]
trials_per_case = 10
weighting = "uniform"
"#;
        let cfg = Config::parse(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.headpose.pitch_threshold_deg, 8.5);
        assert_eq!(cfg.headpose.landmark_indices.len(), 8);
        assert_eq!(cfg.headpose.yaw_threshold_deg, 12.0);
        assert_eq!(cfg.evaluation.negative_value, -1.5);
        assert_eq!(cfg.evaluation.positive_value, 1.0);
        assert_eq!(cfg.server.tick_ms, 250);
        assert_eq!(cfg.simulation.sweep.trials_per_case, 10);
        assert_eq!(cfg.simulation.sweep.weighting, crate::evaluation::Weighting::Uniform);
    }

    #[test]
    fn rejects_unknown_keys_and_invalid_values() {
        assert!(matches!(
            Config::parse("[headpose]\npitch_treshold_deg = 3.0\n", Path::new("x")),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            Config::parse("[evaluation]\nnegative_threshold = 0.5\n", Path::new("x")),
            Err(ConfigError::Invalid(_))
        ));
    }
}
