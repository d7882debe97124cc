//! The `.vhb.json` session log: one file per session holding the summary, the
//! per-trial snapshots, every press and every hand-tracking sample.
//!
//! Keys are written in declaration order, times as seconds with millisecond
//! resolution and all other numbers as shortest round-trip decimals, so a given
//! log always serializes to the same bytes. The schema is documented in
//! `docs/log-schema.md`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{Mode, SessionConfig};
use crate::input::{Hand, HandSample, PressEvent};
use crate::layout::{LayoutName, LayoutSpec, TargetId};
use crate::time::Millis;
use crate::Position3;

pub const SCHEMA_VERSION: u32 = 1;

/// Conventional file extension for session logs.
pub const LOG_EXTENSION: &str = "vhb.json";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("malformed session log: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("unsupported schema_version {found}, expected {SCHEMA_VERSION}")]
    Version { found: u64 },
    #[error("session log violates schema: {0}")]
    Schema(String),
}

fn schema_err(msg: impl Into<String>) -> LogError {
    LogError::Schema(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSnapshot {
    pub trial: u32,
    pub inter_flash_interval_s: Millis,
    pub reaction_time_s: Millis,
    pub false_starts: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccumulatorSnapshot {
    pub press_index: u32,
    pub target: TargetId,
    pub target_pos: Position3,
    pub inter_press_time_s: Millis,
    pub remaining_time_s: Millis,
    pub hand: Hand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSnapshot {
    pub trial: u32,
    pub flashed_sequence: Vec<TargetId>,
    pub sequence_length: u32,
    pub repeated_pattern: Vec<TargetId>,
    pub time_to_repeat_s: Millis,
    pub inter_press_times_s: Vec<Millis>,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Snapshot {
    Reaction(ReactionSnapshot),
    Accumulator(AccumulatorSnapshot),
    Sequence(SequenceSnapshot),
}

impl Snapshot {
    pub fn mode(&self) -> Mode {
        match self {
            Snapshot::Reaction(_) => Mode::Reaction,
            Snapshot::Accumulator(_) => Mode::Accumulator,
            Snapshot::Sequence(_) => Mode::Sequence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRecord {
    pub name: LayoutName,
    pub scale_factor: f64,
    pub targets: Vec<Position3>,
}

impl From<&LayoutSpec> for LayoutRecord {
    fn from(spec: &LayoutSpec) -> Self {
        Self {
            name: spec.name(),
            scale_factor: spec.scale_factor(),
            targets: spec.targets().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub reaction_trials: u32,
    pub accumulator_limit_s: Millis,
    pub flash_interval_bounds_s: (Millis, Millis),
    pub sequence_max_trials: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub score: u32,
    pub duration_s: Millis,
    /// Reaction mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_reaction_time_s: Option<Millis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionLog {
    pub schema_version: u32,
    pub session_id: String,
    pub mode: Mode,
    pub layout: LayoutRecord,
    pub config: ConfigEcho,
    pub summary: Summary,
    pub snapshots: Vec<Snapshot>,
    pub presses: Vec<PressEvent>,
    pub hand_samples: Vec<HandSample>,
}

/// Score implied by a snapshot list: hits for accumulator, completed trials for
/// reaction, longest correctly repeated length for sequence.
pub fn score_from_snapshots(mode: Mode, snapshots: &[Snapshot]) -> u32 {
    match mode {
        Mode::Reaction | Mode::Accumulator => {
            snapshots.iter().filter(|s| s.mode() == mode).count() as u32
        }
        Mode::Sequence => snapshots
            .iter()
            .filter_map(|s| match s {
                Snapshot::Sequence(s) if s.correct => Some(s.sequence_length),
                _ => None,
            })
            .max()
            .unwrap_or(0),
    }
}

/// Mean reaction time rounded to the nearest millisecond, `None` without trials.
pub fn mean_reaction_time(snapshots: &[Snapshot]) -> Option<Millis> {
    let times: Vec<u64> = snapshots
        .iter()
        .filter_map(|s| match s {
            Snapshot::Reaction(r) => Some(r.reaction_time_s.as_ms()),
            _ => None,
        })
        .collect();
    if times.is_empty() {
        return None;
    }
    let n = times.len() as u64;
    Some(Millis((times.iter().sum::<u64>() + n / 2) / n))
}

impl SessionLog {
    pub fn layout_spec(&self) -> Result<LayoutSpec, LogError> {
        LayoutSpec::new(
            self.layout.name,
            self.layout.targets.clone(),
            self.layout.scale_factor,
        )
        .map_err(|e| schema_err(format!("layout: {e}")))
    }

    /// Rebuilds the session config the log was produced with.
    pub fn session_config(&self) -> Result<SessionConfig, LogError> {
        let cfg = SessionConfig {
            mode: self.mode,
            layout: self.layout_spec()?,
            reaction_trials: self.config.reaction_trials,
            accumulator_limit: self.config.accumulator_limit_s,
            flash_interval_bounds: self.config.flash_interval_bounds_s,
            sequence_max_trials: self.config.sequence_max_trials,
            seed: self.config.seed,
        };
        cfg.validate().map_err(|e| schema_err(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn recomputed_score(&self) -> u32 {
        score_from_snapshots(self.mode, &self.snapshots)
    }

    /// Checks every structural invariant of a finished session log.
    pub fn validate(&self) -> Result<(), LogError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LogError::Version {
                found: self.schema_version.into(),
            });
        }
        let cfg = self.session_config()?;
        let layout = &cfg.layout;
        let duration = self.summary.duration_s;

        if let Some(bad) = self.snapshots.iter().find(|s| s.mode() != self.mode) {
            return Err(schema_err(format!(
                "{} snapshot in a {} log",
                bad.mode(),
                self.mode
            )));
        }
        match self.mode {
            Mode::Reaction => self.validate_reaction(&cfg)?,
            Mode::Accumulator => self.validate_accumulator(&cfg)?,
            Mode::Sequence => self.validate_sequence(&cfg)?,
        }

        let score = self.recomputed_score();
        if self.summary.score != score {
            return Err(schema_err(format!(
                "summary score {} but snapshots give {score}",
                self.summary.score
            )));
        }
        let mean = match self.mode {
            Mode::Reaction => mean_reaction_time(&self.snapshots),
            _ => None,
        };
        if self.summary.mean_reaction_time_s != mean {
            return Err(schema_err("mean_reaction_time_s does not match snapshots"));
        }
        if self.mode == Mode::Accumulator && duration != cfg.accumulator_limit {
            return Err(schema_err("accumulator duration differs from the time limit"));
        }

        let mut last_press = Millis::ZERO;
        for p in &self.presses {
            if p.t < last_press || p.t > duration {
                return Err(schema_err(format!("press at {} out of order or range", p.t)));
            }
            last_press = p.t;
            if let Some(target) = p.target {
                if !layout.contains(target) {
                    return Err(schema_err(format!("press on unknown target {target}")));
                }
            }
            if !p.hand_pos.is_finite() {
                return Err(schema_err("non-finite press position"));
            }
        }
        let mut last_sample = [None::<Millis>; 2];
        for s in &self.hand_samples {
            let slot = &mut last_sample[s.hand.index()];
            if slot.is_some_and(|last| s.t < last) || s.t > duration {
                return Err(schema_err(format!("{} hand sample at {} out of order", s.hand, s.t)));
            }
            *slot = Some(s.t);
            if !s.pos.is_finite() {
                return Err(schema_err("non-finite hand sample"));
            }
        }
        Ok(())
    }

    fn validate_reaction(&self, cfg: &SessionConfig) -> Result<(), LogError> {
        let (min, max) = cfg.flash_interval_bounds;
        if self.snapshots.len() > cfg.reaction_trials as usize {
            return Err(schema_err("more reaction snapshots than trials"));
        }
        for (i, snap) in self.snapshots.iter().enumerate() {
            let Snapshot::Reaction(r) = snap else { unreachable!() };
            if r.trial as usize != i + 1 {
                return Err(schema_err(format!("reaction trial {} out of sequence", r.trial)));
            }
            if r.reaction_time_s == Millis::ZERO {
                return Err(schema_err("reaction time must be positive"));
            }
            if r.inter_flash_interval_s < min || r.inter_flash_interval_s > max {
                return Err(schema_err("inter-flash interval outside configured bounds"));
            }
        }
        Ok(())
    }

    fn validate_accumulator(&self, cfg: &SessionConfig) -> Result<(), LogError> {
        let mut prev_remaining = cfg.accumulator_limit;
        let mut prev_target = None;
        for (i, snap) in self.snapshots.iter().enumerate() {
            let Snapshot::Accumulator(a) = snap else { unreachable!() };
            if a.press_index as usize != i {
                return Err(schema_err(format!("press_index {} out of sequence", a.press_index)));
            }
            if cfg.layout.position(a.target) != Some(a.target_pos) {
                return Err(schema_err(format!("target {} position mismatch", a.target)));
            }
            if a.inter_press_time_s == Millis::ZERO {
                return Err(schema_err("inter-press time must be positive"));
            }
            if a.remaining_time_s >= prev_remaining {
                return Err(schema_err("remaining time must strictly decrease"));
            }
            if prev_target == Some(a.target) {
                return Err(schema_err("the same target was lit twice in a row"));
            }
            prev_remaining = a.remaining_time_s;
            prev_target = Some(a.target);
        }
        Ok(())
    }

    fn validate_sequence(&self, cfg: &SessionConfig) -> Result<(), LogError> {
        if self.snapshots.len() > cfg.sequence_max_trials as usize {
            return Err(schema_err("more sequence snapshots than trials"));
        }
        let mut prev: &[TargetId] = &[];
        let n = self.snapshots.len();
        for (i, snap) in self.snapshots.iter().enumerate() {
            let Snapshot::Sequence(s) = snap else { unreachable!() };
            if s.trial as usize != i + 1 || s.flashed_sequence.len() != i + 1 {
                return Err(schema_err(format!("sequence trial {} has the wrong length", s.trial)));
            }
            if s.sequence_length as usize != s.flashed_sequence.len() {
                return Err(schema_err("sequence_length differs from flashed_sequence"));
            }
            if !s.flashed_sequence.starts_with(prev) {
                return Err(schema_err("flashed sequence does not extend the previous trial"));
            }
            let expected_gaps = s.repeated_pattern.len().saturating_sub(1);
            if s.inter_press_times_s.len() != expected_gaps {
                return Err(schema_err("inter_press_times_s length mismatch"));
            }
            if s.repeated_pattern.len() > s.flashed_sequence.len() {
                return Err(schema_err("repeated pattern longer than flashed sequence"));
            }
            let matches = s.repeated_pattern == s.flashed_sequence;
            if s.correct != matches {
                return Err(schema_err("correct flag disagrees with the repeated pattern"));
            }
            if !s.correct && i + 1 != n {
                return Err(schema_err("session continued after an incorrect trial"));
            }
            if s.flashed_sequence.iter().any(|t| !cfg.layout.contains(*t)) {
                return Err(schema_err("flashed sequence names an unknown target"));
            }
            prev = &s.flashed_sequence;
        }
        Ok(())
    }
}

/// Serializes a validated log to its canonical bytes (pretty JSON plus a trailing newline).
pub fn serialize(log: &SessionLog) -> Result<Vec<u8>, LogError> {
    log.validate()?;
    let mut bytes = serde_json::to_vec_pretty(log).map_err(LogError::Parse)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses a log, checking the schema version and structure but not the
/// cross-field invariants. Used by tools that report inconsistencies themselves.
pub fn parse_unvalidated(bytes: &[u8]) -> Result<SessionLog, LogError> {
    let value: Value = serde_json::from_slice(bytes).map_err(LogError::Parse)?;
    match value.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(found) => return Err(LogError::Version { found }),
        None => return Err(schema_err("missing or non-integer schema_version")),
    }
    serde_json::from_value(value).map_err(|e| schema_err(e.to_string()))
}

/// Parses and fully validates a log.
pub fn parse(bytes: &[u8]) -> Result<SessionLog, LogError> {
    let log = parse_unvalidated(bytes)?;
    log.validate()?;
    Ok(log)
}
