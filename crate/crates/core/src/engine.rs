//! Event-driven state machines for the reaction, accumulator and sequence modes.
//!
//! A [`Session`] owns a logical clock that only moves when the caller advances
//! it, either explicitly through [`Session::advance`] or implicitly by feeding a
//! timestamped press or hand sample. Scheduled happenings (flashes, game over)
//! fire at their exact scheduled time no matter how coarsely the clock is
//! advanced, so the resulting log depends only on the config and the input
//! stream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Mode, SessionConfig};
use crate::input::{Hand, HandSample, PressEvent};
use crate::layout::TargetId;
use crate::log::{
    mean_reaction_time, AccumulatorSnapshot, ConfigEcho, LayoutRecord, ReactionSnapshot,
    SequenceSnapshot, SessionLog, Snapshot, Summary, SCHEMA_VERSION,
};
use crate::rng::{extend_sequence, next_flash_delay, pick_target, GameRng};
use crate::time::Millis;

/// How long each element of a sequence pattern stays lit.
pub const SEQUENCE_FLASH_ON: Millis = Millis::from_ms(600);
/// Dark gap between consecutive elements of a sequence pattern.
pub const SEQUENCE_FLASH_GAP: Millis = Millis::from_ms(300);

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("time went backwards: {now} is before the session clock {clock}")]
    Clock { now: Millis, clock: Millis },
    #[error("target {0} is not on this layout")]
    UnknownTarget(TargetId),
    #[error("{hand} hand sample at {t} precedes the previous one at {last}")]
    SampleOrder { hand: Hand, t: Millis, last: Millis },
    #[error("hand sample at {t} is after the session ended at {ended_at}")]
    SampleOutOfSession { t: Millis, ended_at: Millis },
    #[error("non-finite position")]
    NonFinitePosition,
    #[error("session is not finished")]
    NotFinished,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineEvent {
    TrialStart { t: Millis, trial: u32 },
    FlashOn { t: Millis, targets: Vec<TargetId> },
    FlashOff { t: Millis, targets: Vec<TargetId> },
    GameOver { t: Millis, score: u32 },
}

impl EngineEvent {
    pub fn time(&self) -> Millis {
        match self {
            EngineEvent::TrialStart { t, .. }
            | EngineEvent::FlashOn { t, .. }
            | EngineEvent::FlashOff { t, .. }
            | EngineEvent::GameOver { t, .. } => *t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Hit,
    Miss,
    FalseStart,
    Ignored,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Hit => "hit",
            OutcomeKind::Miss => "miss",
            OutcomeKind::FalseStart => "false_start",
            OutcomeKind::Ignored => "ignored",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PressOutcome {
    pub kind: OutcomeKind,
    pub score_after: u32,
    /// 1-based trial for reaction and sequence, 0-based hit index for accumulator.
    pub trial_index: u32,
}

#[derive(Clone, Debug)]
enum ReactionState {
    Waiting { flash_at: Millis, delay: Millis, false_starts: u32 },
    Lit { flash_at: Millis, delay: Millis, false_starts: u32 },
}

#[derive(Clone, Debug)]
enum AccumulatorState {
    Waiting { flash_at: Millis },
    Lit { target: TargetId, lit_at: Millis },
}

#[derive(Clone, Debug)]
enum SequenceState {
    /// Step `2i` lights element `i`, step `2i + 1` turns it off.
    Playback { start_at: Millis, step: usize },
    Awaiting { ready_at: Millis, presses: Vec<(TargetId, Millis)> },
}

#[derive(Clone, Debug)]
enum Phase {
    Reaction { trial: u32, state: ReactionState },
    Accumulator { deadline: Millis, hits: u32, state: AccumulatorState },
    Sequence { trial: u32, pattern: Vec<TargetId>, state: SequenceState },
    Over { at: Millis },
}

/// One game session. All calls for a session must be serialized by the caller.
#[derive(Clone, Debug)]
pub struct Session {
    config: SessionConfig,
    session_id: String,
    clock: Millis,
    rng: GameRng,
    phase: Phase,
    score: u32,
    snapshots: Vec<Snapshot>,
    presses: Vec<PressEvent>,
    hand_samples: Vec<HandSample>,
    last_sample: [Option<Millis>; 2],
    outbox: Vec<EngineEvent>,
}

/// Default session id: mode and seed, which is unique per (mode, seed) pair.
pub fn default_session_id(config: &SessionConfig) -> String {
    format!("{}-{:016x}", config.mode, config.seed)
}

/// Starts a session at logical time zero with [`default_session_id`].
pub fn new_session(config: SessionConfig) -> Result<Session, EngineError> {
    let id = default_session_id(&config);
    Session::with_id(config, id)
}

impl Session {
    pub fn with_id(config: SessionConfig, session_id: impl Into<String>) -> Result<Self, EngineError> {
        config.validate()?;
        let mut rng = GameRng::seed_from_u64(config.seed);
        let mut outbox = Vec::new();
        let phase = match config.mode {
            Mode::Reaction => {
                let delay = next_flash_delay(&mut rng, config.flash_interval_bounds);
                outbox.push(EngineEvent::TrialStart { t: Millis::ZERO, trial: 1 });
                Phase::Reaction {
                    trial: 1,
                    state: ReactionState::Waiting { flash_at: delay, delay, false_starts: 0 },
                }
            }
            Mode::Accumulator => {
                let delay = next_flash_delay(&mut rng, config.flash_interval_bounds);
                outbox.push(EngineEvent::TrialStart { t: Millis::ZERO, trial: 1 });
                Phase::Accumulator {
                    deadline: config.accumulator_limit,
                    hits: 0,
                    state: AccumulatorState::Waiting { flash_at: delay },
                }
            }
            Mode::Sequence => {
                let pattern = extend_sequence(&[], &mut rng, config.layout.len());
                let delay = next_flash_delay(&mut rng, config.flash_interval_bounds);
                outbox.push(EngineEvent::TrialStart { t: Millis::ZERO, trial: 1 });
                Phase::Sequence {
                    trial: 1,
                    pattern,
                    state: SequenceState::Playback { start_at: delay, step: 0 },
                }
            }
        };
        Ok(Self {
            config,
            session_id: session_id.into(),
            clock: Millis::ZERO,
            rng,
            phase,
            score: 0,
            snapshots: Vec::new(),
            presses: Vec::new(),
            hand_samples: Vec::new(),
            last_sample: [None; 2],
            outbox,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn clock(&self) -> Millis {
        self.clock
    }

    pub fn score(&self) -> u32 {
        self.score
    }

    pub fn is_over(&self) -> bool {
        matches!(self.phase, Phase::Over { .. })
    }

    pub fn ended_at(&self) -> Option<Millis> {
        match self.phase {
            Phase::Over { at } => Some(at),
            _ => None,
        }
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// Current trial (1-based) for reaction and sequence, hits so far for accumulator.
    pub fn trial_index(&self) -> u32 {
        match &self.phase {
            Phase::Reaction { trial, .. } | Phase::Sequence { trial, .. } => *trial,
            Phase::Accumulator { hits, .. } => *hits,
            Phase::Over { .. } => match self.config.mode {
                Mode::Accumulator => self.score,
                _ => self.snapshots.len() as u32,
            },
        }
    }

    /// Targets lit at the current clock.
    pub fn lit_targets(&self) -> Vec<TargetId> {
        match &self.phase {
            Phase::Reaction { state: ReactionState::Lit { .. }, .. } => self.config.layout.ids().collect(),
            Phase::Accumulator { state: AccumulatorState::Lit { target, .. }, .. } => vec![*target],
            Phase::Sequence { pattern, state: SequenceState::Playback { step, .. }, .. }
                if step % 2 == 1 =>
            {
                vec![pattern[step / 2]]
            }
            _ => Vec::new(),
        }
    }

    /// True while the session waits for the player to repeat a sequence.
    pub fn awaiting_repeat(&self) -> bool {
        matches!(self.phase, Phase::Sequence { state: SequenceState::Awaiting { .. }, .. })
    }

    /// Time of the next scheduled engine event, if any is pending.
    pub fn next_event_time(&self) -> Option<Millis> {
        match &self.phase {
            Phase::Reaction { state: ReactionState::Waiting { flash_at, .. }, .. } => Some(*flash_at),
            Phase::Reaction { state: ReactionState::Lit { .. }, .. } => None,
            Phase::Accumulator { deadline, state, .. } => match state {
                AccumulatorState::Waiting { flash_at } => Some((*flash_at).min(*deadline)),
                AccumulatorState::Lit { .. } => Some(*deadline),
            },
            Phase::Sequence { state: SequenceState::Playback { start_at, step }, .. } => {
                Some(sequence_step_time(*start_at, *step))
            }
            Phase::Sequence { state: SequenceState::Awaiting { .. }, .. } => None,
            Phase::Over { .. } => None,
        }
    }

    /// Fires every scheduled event up to `now`, moves the clock to `now` and
    /// returns all events produced since the previous drain, in time order.
    pub fn advance(&mut self, now: Millis) -> Result<Vec<EngineEvent>, EngineError> {
        self.run_until(now)?;
        Ok(self.take_events())
    }

    /// Drains events produced by presses or implicit clock advances.
    pub fn take_events(&mut self) -> Vec<EngineEvent> {
        std::mem::take(&mut self.outbox)
    }

    fn run_until(&mut self, now: Millis) -> Result<(), EngineError> {
        if now < self.clock {
            return Err(EngineError::Clock { now, clock: self.clock });
        }
        while let Some(t) = self.next_event_time() {
            if t > now {
                break;
            }
            self.clock = t;
            self.fire(t);
        }
        self.clock = now;
        Ok(())
    }

    fn fire(&mut self, t: Millis) {
        let n_targets = self.config.layout.len();
        match &mut self.phase {
            Phase::Reaction { state, .. } => {
                if let ReactionState::Waiting { flash_at, delay, false_starts } = *state {
                    *state = ReactionState::Lit { flash_at, delay, false_starts };
                    let targets = self.config.layout.ids().collect();
                    self.outbox.push(EngineEvent::FlashOn { t, targets });
                }
            }
            Phase::Accumulator { deadline, state, .. } => {
                if t >= *deadline {
                    if let AccumulatorState::Lit { target, .. } = state {
                        let targets = vec![*target];
                        self.outbox.push(EngineEvent::FlashOff { t, targets });
                    }
                    self.game_over(t);
                } else if let AccumulatorState::Waiting { .. } = state {
                    let target = pick_target(&mut self.rng, n_targets, None);
                    *state = AccumulatorState::Lit { target, lit_at: t };
                    self.outbox.push(EngineEvent::FlashOn { t, targets: vec![target] });
                }
            }
            Phase::Sequence { pattern, state, .. } => {
                if let SequenceState::Playback { step, .. } = state {
                    let target = pattern[*step / 2];
                    if *step % 2 == 0 {
                        self.outbox.push(EngineEvent::FlashOn { t, targets: vec![target] });
                        *step += 1;
                    } else if *step + 1 < 2 * pattern.len() {
                        self.outbox.push(EngineEvent::FlashOff { t, targets: vec![target] });
                        *step += 1;
                    } else {
                        self.outbox.push(EngineEvent::FlashOff { t, targets: vec![target] });
                        *state = SequenceState::Awaiting { ready_at: t, presses: Vec::new() };
                    }
                }
            }
            Phase::Over { .. } => {}
        }
    }

    fn game_over(&mut self, t: Millis) {
        self.phase = Phase::Over { at: t };
        self.outbox.push(EngineEvent::GameOver { t, score: self.score });
    }

    fn outcome(&self, kind: OutcomeKind) -> PressOutcome {
        PressOutcome {
            kind,
            score_after: self.score,
            trial_index: self.trial_index(),
        }
    }

    /// Applies a press. The clock is first advanced to the press time; events this
    /// produces are left for [`Session::take_events`].
    pub fn handle_press(&mut self, e: PressEvent) -> Result<PressOutcome, EngineError> {
        if self.is_over() {
            return Ok(self.outcome(OutcomeKind::Ignored));
        }
        if let Some(target) = e.target {
            if !self.config.layout.contains(target) {
                return Err(EngineError::UnknownTarget(target));
            }
        }
        if !e.hand_pos.is_finite() {
            return Err(EngineError::NonFinitePosition);
        }
        self.run_until(e.t)?;
        if self.is_over() {
            return Ok(self.outcome(OutcomeKind::Ignored));
        }
        let kind = match self.config.mode {
            Mode::Reaction => self.press_reaction(&e),
            Mode::Accumulator => self.press_accumulator(&e),
            Mode::Sequence => self.press_sequence(&e),
        };
        Ok(self.outcome(kind))
    }

    fn press_reaction(&mut self, e: &PressEvent) -> OutcomeKind {
        let Phase::Reaction { trial, state } = &mut self.phase else { unreachable!() };
        let trial = *trial;
        self.presses.push(*e);
        let (flash_at, delay, false_starts, lit) = match *state {
            ReactionState::Waiting { flash_at, delay, false_starts } => (flash_at, delay, false_starts, false),
            ReactionState::Lit { flash_at, delay, false_starts } => (flash_at, delay, false_starts, true),
        };
        let all: Vec<TargetId> = self.config.layout.ids().collect();
        if lit {
            self.outbox.push(EngineEvent::FlashOff { t: e.t, targets: all });
        }
        // a press at the flash instant cannot be a reaction to it
        if !lit || e.t == flash_at {
            let delay = next_flash_delay(&mut self.rng, self.config.flash_interval_bounds);
            *state = ReactionState::Waiting {
                flash_at: e.t + delay,
                delay,
                false_starts: false_starts + 1,
            };
            return OutcomeKind::FalseStart;
        }
        self.snapshots.push(Snapshot::Reaction(ReactionSnapshot {
            trial,
            inter_flash_interval_s: delay,
            reaction_time_s: e.t - flash_at,
            false_starts,
        }));
        self.score += 1;
        if trial >= self.config.reaction_trials {
            self.game_over(e.t);
        } else {
            let delay = next_flash_delay(&mut self.rng, self.config.flash_interval_bounds);
            self.phase = Phase::Reaction {
                trial: trial + 1,
                state: ReactionState::Waiting { flash_at: e.t + delay, delay, false_starts: 0 },
            };
            self.outbox.push(EngineEvent::TrialStart { t: e.t, trial: trial + 1 });
        }
        OutcomeKind::Hit
    }

    fn press_accumulator(&mut self, e: &PressEvent) -> OutcomeKind {
        let n_targets = self.config.layout.len();
        let Phase::Accumulator { deadline, hits, state } = &mut self.phase else { unreachable!() };
        let AccumulatorState::Lit { target, lit_at } = *state else {
            self.presses.push(*e);
            return OutcomeKind::Miss;
        };
        if e.target != Some(target) {
            self.presses.push(*e);
            return OutcomeKind::Miss;
        }
        if e.t == lit_at {
            // same instant the target lit: no measurable inter-press time
            return OutcomeKind::Ignored;
        }
        self.presses.push(*e);
        self.snapshots.push(Snapshot::Accumulator(AccumulatorSnapshot {
            press_index: *hits,
            target,
            target_pos: self.config.layout.position(target).expect("lit target on layout"),
            inter_press_time_s: e.t - lit_at,
            remaining_time_s: *deadline - e.t,
            hand: e.hand,
        }));
        *hits += 1;
        self.score += 1;
        let next = pick_target(&mut self.rng, n_targets, Some(target));
        *state = AccumulatorState::Lit { target: next, lit_at: e.t };
        self.outbox.push(EngineEvent::FlashOff { t: e.t, targets: vec![target] });
        self.outbox.push(EngineEvent::FlashOn { t: e.t, targets: vec![next] });
        OutcomeKind::Hit
    }

    fn press_sequence(&mut self, e: &PressEvent) -> OutcomeKind {
        let n_targets = self.config.layout.len();
        let Phase::Sequence { trial, pattern, state } = &mut self.phase else { unreachable!() };
        let SequenceState::Awaiting { ready_at, presses } = state else {
            // input is locked while the pattern plays
            return OutcomeKind::Ignored;
        };
        self.presses.push(*e);
        let Some(target) = e.target else {
            return OutcomeKind::Miss;
        };
        presses.push((target, e.t));
        let correct_so_far = pattern[presses.len() - 1] == target;
        if correct_so_far && presses.len() < pattern.len() {
            return OutcomeKind::Hit;
        }
        let snapshot = SequenceSnapshot {
            trial: *trial,
            flashed_sequence: pattern.clone(),
            sequence_length: pattern.len() as u32,
            repeated_pattern: presses.iter().map(|(t, _)| *t).collect(),
            time_to_repeat_s: e.t - *ready_at,
            inter_press_times_s: presses.windows(2).map(|w| w[1].1 - w[0].1).collect(),
            correct: correct_so_far,
        };
        self.snapshots.push(Snapshot::Sequence(snapshot));
        if !correct_so_far {
            self.game_over(e.t);
            return OutcomeKind::Miss;
        }
        self.score = pattern.len() as u32;
        if *trial >= self.config.sequence_max_trials {
            self.game_over(e.t);
        } else {
            let next_trial = *trial + 1;
            let next_pattern = extend_sequence(pattern, &mut self.rng, n_targets);
            let delay = next_flash_delay(&mut self.rng, self.config.flash_interval_bounds);
            self.phase = Phase::Sequence {
                trial: next_trial,
                pattern: next_pattern,
                state: SequenceState::Playback { start_at: e.t + delay, step: 0 },
            };
            self.outbox.push(EngineEvent::TrialStart { t: e.t, trial: next_trial });
        }
        OutcomeKind::Hit
    }

    /// Stores a hand-tracking sample. Samples are per-hand time ordered; a sample
    /// ahead of the clock advances it, one behind it (from the other hand) is kept
    /// as is.
    pub fn record_hand_sample(&mut self, s: HandSample) -> Result<(), EngineError> {
        if !s.pos.is_finite() {
            return Err(EngineError::NonFinitePosition);
        }
        if let Some(last) = self.last_sample[s.hand.index()] {
            if s.t < last {
                return Err(EngineError::SampleOrder { hand: s.hand, t: s.t, last });
            }
        }
        if let Some(ended_at) = self.ended_at() {
            if s.t > ended_at {
                return Err(EngineError::SampleOutOfSession { t: s.t, ended_at });
            }
        } else if s.t > self.clock {
            self.run_until(s.t)?;
            if let Some(ended_at) = self.ended_at() {
                if s.t > ended_at {
                    return Err(EngineError::SampleOutOfSession { t: s.t, ended_at });
                }
            }
        }
        self.last_sample[s.hand.index()] = Some(s.t);
        self.hand_samples.push(s);
        Ok(())
    }

    pub fn final_score(&self) -> Result<u32, EngineError> {
        if self.is_over() {
            Ok(self.score)
        } else {
            Err(EngineError::NotFinished)
        }
    }

    /// The finished session's log.
    pub fn to_log(&self) -> Result<SessionLog, EngineError> {
        let ended_at = self.ended_at().ok_or(EngineError::NotFinished)?;
        let cfg = &self.config;
        Ok(SessionLog {
            schema_version: SCHEMA_VERSION,
            session_id: self.session_id.clone(),
            mode: cfg.mode,
            layout: LayoutRecord::from(&cfg.layout),
            config: ConfigEcho {
                reaction_trials: cfg.reaction_trials,
                accumulator_limit_s: cfg.accumulator_limit,
                flash_interval_bounds_s: cfg.flash_interval_bounds,
                sequence_max_trials: cfg.sequence_max_trials,
                seed: cfg.seed,
            },
            summary: Summary {
                score: self.score,
                duration_s: ended_at,
                mean_reaction_time_s: match cfg.mode {
                    Mode::Reaction => mean_reaction_time(&self.snapshots),
                    _ => None,
                },
            },
            snapshots: self.snapshots.clone(),
            presses: self.presses.clone(),
            hand_samples: self.hand_samples.clone(),
        })
    }
}

fn sequence_step_time(start_at: Millis, step: usize) -> Millis {
    let period = SEQUENCE_FLASH_ON + SEQUENCE_FLASH_GAP;
    let element = (step / 2) as u64;
    let base = start_at + Millis(element * period.as_ms());
    if step % 2 == 0 {
        base
    } else {
        base + SEQUENCE_FLASH_ON
    }
}
