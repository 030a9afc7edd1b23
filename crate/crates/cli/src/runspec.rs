//! Run-spec file: which system, direction, grid and solver settings to use.

use std::path::{Path, PathBuf};

use liftgait::linkage::{Direction, SystemModel};
use liftgait::optimize::SolverSettings;
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_SEED: u64 = liftgait::verify::DEFAULT_SEED;

/// A preset name (`swimmer`, `snake`) or a full model description.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Preset(String),
    Custom(SystemModel),
}

impl<'de> Deserialize<'de> for SystemSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        // Parsed in two steps so a bad custom model reports the offending field.
        let value = serde_json::Value::deserialize(d)?;
        match value {
            serde_json::Value::String(s) => Ok(Self::Preset(s)),
            other => serde_json::from_value(other).map(Self::Custom).map_err(serde::de::Error::custom),
        }
    }
}

impl SystemSpec {
    pub fn model(&self) -> Result<SystemModel, CliError> {
        match self {
            Self::Preset(name) => Ok(SystemModel::preset(name)?),
            Self::Custom(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub system: SystemSpec,
    /// Defaults to theta for the snake and x otherwise.
    pub direction: Option<Direction>,
    pub resolution: usize,
    pub momentum_levels: Option<Vec<f64>>,
    pub settings: SolverSettings,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            system: SystemSpec::Preset("swimmer".into()),
            direction: None,
            resolution: DEFAULT_RESOLUTION,
            momentum_levels: None,
            settings: SolverSettings::default(),
            output: None,
            seed: DEFAULT_SEED,
        }
    }
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read run spec {}: {e}", path.display())))?;
        let spec: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("run spec {}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.system.model()?;
        liftgait::field::GridLayout::new(self.resolution)?;
        self.settings.validate()?;
        if self.direction == Some(Direction::Y) {
            return Err(CliError::Invalid("direction must be x or theta".into()));
        }
        if let Some(levels) = &self.momentum_levels {
            if levels.first() != Some(&0.0) || levels.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(CliError::Invalid("momentum_levels must ascend strictly from 0".into()));
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        self.direction.unwrap_or(match &self.system {
            SystemSpec::Preset(name) if name == "snake" => Direction::Theta,
            _ => Direction::X,
        })
    }
}
