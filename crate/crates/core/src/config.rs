//! The repo-wide configuration file: a plain `key = value` text format
//! holding the energy rates and crane travel conventions. Unknown keys are
//! rejected so typos fail fast. The format is documented in
//! `docs/formats.md`; `crp calibrate` writes files in this format.

use thiserror::Error;

use crate::energy::{EnergyParams, KinematicsConfig};
use crate::yard::Slot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{key} must be non-negative, got {value}")]
    NegativeValue { key: String, value: f64 },
}

/// Energy rates plus kinematics conventions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Config {
    pub energy: EnergyParams,
    pub kinematics: KinematicsConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line_no = line_no + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::MalformedLine {
                line: line_no,
                text: line.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| ConfigError::BadValue {
                line: line_no,
                key: key.to_string(),
                message,
            };
            match key {
                "hoist_energy_per_tier" => {
                    config.energy.hoist = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                }
                "lower_energy_per_tier" => {
                    config.energy.lower = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                }
                "cross_energy_per_stack" => {
                    config.energy.cross = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                }
                "crane_weight" => {
                    config.energy.crane_weight = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                }
                "count_empty_moves" => {
                    config.kinematics.count_empty_moves = match value {
                        "true" => true,
                        "false" => false,
                        other => return Err(bad(format!("expected true/false, got `{other}`"))),
                    }
                }
                "truck_tier" => {
                    config.kinematics.truck_tier =
                        value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "initial_crane_stack" => {
                    config.kinematics.initial_crane_position.stack =
                        value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "initial_crane_tier" => {
                    config.kinematics.initial_crane_position.tier =
                        value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                other => {
                    return Err(ConfigError::UnknownKey {
                        line: line_no,
                        key: other.to_string(),
                    })
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("hoist_energy_per_tier", self.energy.hoist),
            ("lower_energy_per_tier", self.energy.lower),
            ("cross_energy_per_stack", self.energy.cross),
            ("crane_weight", self.energy.crane_weight),
        ];
        for (key, value) in fields {
            if !(value >= 0.0) {
                return Err(ConfigError::NegativeValue {
                    key: key.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "# crp configuration\n\
             hoist_energy_per_tier = {}\n\
             lower_energy_per_tier = {}\n\
             cross_energy_per_stack = {}\n\
             crane_weight = {}\n\
             count_empty_moves = {}\n\
             truck_tier = {}\n\
             initial_crane_stack = {}\n\
             initial_crane_tier = {}\n",
            self.energy.hoist,
            self.energy.lower,
            self.energy.cross,
            self.energy.crane_weight,
            self.kinematics.count_empty_moves,
            self.kinematics.truck_tier,
            self.kinematics.initial_crane_position.stack,
            self.kinematics.initial_crane_position.tier,
        )
    }

    pub fn with_kinematics(kinematics: KinematicsConfig) -> Self {
        Config {
            energy: EnergyParams::default(),
            kinematics,
        }
    }

    pub fn initial_crane(&self) -> Slot {
        self.kinematics.initial_crane_position
    }
}
