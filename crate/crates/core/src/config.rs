use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{layout, LayoutName, LayoutSpec};
use crate::time::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Reaction,
    Accumulator,
    Sequence,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Reaction, Mode::Accumulator, Mode::Sequence];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Reaction => "reaction",
            Mode::Accumulator => "accumulator",
            Mode::Sequence => "sequence",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownMode(s.to_owned()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("reaction_trials must be at least 1")]
    NoReactionTrials,
    #[error("sequence_max_trials must be at least 1")]
    NoSequenceTrials,
    #[error("accumulator limit must be positive")]
    NonPositiveLimit,
    #[error("flash interval bounds ({min}, {max}) must satisfy 0 < min <= max")]
    BadFlashBounds { min: Millis, max: Millis },
    #[error("layout needs at least two targets")]
    TooFewTargets,
}

pub const DEFAULT_REACTION_TRIALS: u32 = 5;
pub const DEFAULT_ACCUMULATOR_LIMIT: Millis = Millis::from_ms(60_000);
pub const DEFAULT_FLASH_BOUNDS: (Millis, Millis) = (Millis::from_ms(5_000), Millis::from_ms(15_000));
pub const DEFAULT_SEQUENCE_MAX_TRIALS: u32 = 20;

/// Everything needed to start a session. Two sessions with equal configs and equal
/// input streams produce identical logs.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub mode: Mode,
    pub layout: LayoutSpec,
    pub reaction_trials: u32,
    pub accumulator_limit: Millis,
    pub flash_interval_bounds: (Millis, Millis),
    pub sequence_max_trials: u32,
    pub seed: u64,
}

impl SessionConfig {
    /// Defaults: 5 reaction trials, 60 s accumulator limit, flashes 5-15 s apart,
    /// at most 20 sequence trials, seed 0.
    pub fn new(mode: Mode, layout: LayoutSpec) -> Self {
        Self {
            mode,
            layout,
            reaction_trials: DEFAULT_REACTION_TRIALS,
            accumulator_limit: DEFAULT_ACCUMULATOR_LIMIT,
            flash_interval_bounds: DEFAULT_FLASH_BOUNDS,
            sequence_max_trials: DEFAULT_SEQUENCE_MAX_TRIALS,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (min, max) = self.flash_interval_bounds;
        if min == Millis::ZERO || min > max {
            return Err(ConfigError::BadFlashBounds { min, max });
        }
        if self.reaction_trials == 0 {
            return Err(ConfigError::NoReactionTrials);
        }
        if self.sequence_max_trials == 0 {
            return Err(ConfigError::NoSequenceTrials);
        }
        if self.accumulator_limit == Millis::ZERO {
            return Err(ConfigError::NonPositiveLimit);
        }
        if self.layout.len() < 2 {
            return Err(ConfigError::TooFewTargets);
        }
        Ok(())
    }
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self::new(Mode::Accumulator, layout(LayoutName::Classic12))
    }
}
