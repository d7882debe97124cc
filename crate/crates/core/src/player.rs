//! Simulated players that drive headless sessions.
//!
//! A player reacts to flashes after a latency drawn from a normal distribution
//! truncated at 50 ms, then moves a hand to the target in Fitts's-law time
//! `MT = a + b log2(D / W + 1)` with `W` the 0.08 m button width. Hand paths are
//! straight lines sampled at 20 Hz into the log.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Mode, SessionConfig};
use crate::engine::{EngineError, EngineEvent, OutcomeKind, Session};
use crate::input::{Hand, HandSample, PressEvent};
use crate::layout::TargetId;
use crate::log::SessionLog;
use crate::rng::{pick_target, GameRng};
use crate::scalar::Scalar;
use crate::time::Millis;
use crate::Position3;

pub const BUTTON_WIDTH_M: f64 = 0.08;
pub const MIN_REACTION_S: f64 = 0.05;
/// Probability that the hand nearer the target is used.
pub const NEARER_HAND_PROB: f64 = 0.8;
pub const SAMPLE_INTERVAL: Millis = Millis::from_ms(50);
/// Pause between consecutive presses when repeating a sequence.
pub const SEQUENCE_DWELL: Millis = Millis::from_ms(100);

pub const LEFT_REST: Position3 = Position3 { x: -0.25, y: -0.45, z: 0.3 };
pub const RIGHT_REST: Position3 = Position3 { x: 0.25, y: -0.45, z: 0.3 };

#[derive(Debug, Error)]
pub enum PlayerError {
    #[error("invalid player parameter: {0}")]
    InvalidParams(String),
    #[error("malformed player parameters: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlayerParams {
    pub reaction_mean_s: f64,
    pub reaction_sd_s: f64,
    pub fitts_a_s: f64,
    pub fitts_b_s: f64,
    pub error_rate: f64,
    /// Probability of using the right hand when not going with the nearer one.
    pub handedness_bias: f64,
    pub seed: u64,
}

impl Default for PlayerParams {
    fn default() -> Self {
        Self {
            reaction_mean_s: 0.35,
            reaction_sd_s: 0.06,
            fitts_a_s: 0.1,
            fitts_b_s: 0.15,
            error_rate: 0.02,
            handedness_bias: 0.7,
            seed: 0,
        }
    }
}

impl PlayerParams {
    pub fn from_json(bytes: &[u8]) -> Result<Self, PlayerError> {
        let params: Self = serde_json::from_slice(bytes)?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), PlayerError> {
        let bad = |what: &str| Err(PlayerError::InvalidParams(what.to_owned()));
        let all = [
            self.reaction_mean_s,
            self.reaction_sd_s,
            self.fitts_a_s,
            self.fitts_b_s,
            self.error_rate,
            self.handedness_bias,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.reaction_mean_s <= 0.0 {
            return bad("reaction_mean_s must be positive");
        }
        if self.reaction_sd_s < 0.0 || self.fitts_a_s < 0.0 || self.fitts_b_s < 0.0 {
            return bad("reaction_sd_s, fitts_a_s and fitts_b_s must be non-negative");
        }
        if !(0.0..1.0).contains(&self.error_rate) {
            return bad("error_rate must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.handedness_bias) {
            return bad("handedness_bias must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Fitts's-law movement time for a reach of `distance` to a target of `width`.
pub fn fitts_movement_time<T: Scalar>(a: T, b: T, distance: T, width: T) -> T {
    a + b * (distance / width + T::one()).log2()
}

/// Piecewise-linear hand trajectory: `(time, position)` waypoints, held constant
/// between moves.
#[derive(Clone, Debug)]
struct HandPath {
    waypoints: Vec<(Millis, Position3)>,
}

impl HandPath {
    fn new(rest: Position3) -> Self {
        Self {
            waypoints: vec![(Millis::ZERO, rest)],
        }
    }

    fn last(&self) -> (Millis, Position3) {
        *self.waypoints.last().expect("path has a start")
    }

    /// Position once every planned move has finished.
    fn final_pos(&self) -> Position3 {
        self.last().1
    }

    fn free_at(&self) -> Millis {
        self.last().0
    }

    fn move_to(&mut self, start: Millis, end: Millis, to: Position3) {
        let (_, from) = self.last();
        let start = start.max(self.free_at());
        let end = end.max(start);
        self.waypoints.push((start, from));
        self.waypoints.push((end, to));
    }

    fn at(&self, t: Millis) -> Position3 {
        let idx = self.waypoints.partition_point(|(wt, _)| *wt <= t);
        if idx == 0 {
            return self.waypoints[0].1;
        }
        let (t0, p0) = self.waypoints[idx - 1];
        match self.waypoints.get(idx) {
            None => p0,
            Some(&(t1, p1)) => {
                let span = (t1 - t0).as_ms() as f64;
                if span == 0.0 {
                    p1
                } else {
                    p0.lerp(p1, (t - t0).as_ms() as f64 / span)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PlannedPress {
    t: Millis,
    target: Option<TargetId>,
    hand: Hand,
}

struct SimPlayer {
    params: PlayerParams,
    rng: GameRng,
    reaction: Normal<f64>,
    hands: [HandPath; 2],
    planned: Vec<PlannedPress>,
    observed: Vec<TargetId>,
    repeat_planned: bool,
}

fn secs(s: f64) -> Millis {
    Millis::from_secs_f64(s.max(0.0)).expect("finite simulated duration")
}

impl SimPlayer {
    fn new(params: PlayerParams) -> Self {
        let reaction = Normal::new(params.reaction_mean_s, params.reaction_sd_s)
            .expect("validated reaction parameters");
        Self {
            rng: GameRng::seed_from_u64(params.seed),
            params,
            reaction,
            hands: [HandPath::new(LEFT_REST), HandPath::new(RIGHT_REST)],
            planned: Vec::new(),
            observed: Vec::new(),
            repeat_planned: false,
        }
    }

    fn reaction_time(&mut self) -> Millis {
        for _ in 0..64 {
            let rt = self.reaction.sample(&mut self.rng);
            if rt >= MIN_REACTION_S {
                return secs(rt);
            }
        }
        secs(MIN_REACTION_S)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.next_unit() < p
    }

    fn choose_hand(&mut self, target: Option<Position3>) -> Hand {
        if let Some(target) = target {
            if self.chance(NEARER_HAND_PROB) {
                let dl = self.hands[0].final_pos().distance(target);
                let dr = self.hands[1].final_pos().distance(target);
                return if dl < dr { Hand::Left } else { Hand::Right };
            }
        }
        if self.chance(self.params.handedness_bias) {
            Hand::Right
        } else {
            Hand::Left
        }
    }

    /// Moves `hand` to `pos` starting no earlier than `start`; returns arrival time.
    fn reach(&mut self, hand: Hand, start: Millis, pos: Position3) -> Millis {
        let path = &mut self.hands[hand.index()];
        let start = start.max(path.free_at());
        let distance = path.final_pos().distance(pos);
        let mt = fitts_movement_time(
            self.params.fitts_a_s,
            self.params.fitts_b_s,
            distance,
            BUTTON_WIDTH_M,
        );
        let end = start + secs(mt).max(Millis(1));
        path.move_to(start, end, pos);
        end
    }

    fn plan(&mut self, t: Millis, target: Option<TargetId>, hand: Hand) {
        self.planned.push(PlannedPress { t, target, hand });
        self.planned.sort_by_key(|p| p.t);
    }

    fn plan_reach_press(&mut self, session: &Session, start: Millis, target: TargetId, hand: Hand) -> Millis {
        let pos = session.config().layout.position(target).expect("target on layout");
        let t = self.reach(hand, start, pos);
        self.plan(t, Some(target), hand);
        t
    }

    fn on_events(&mut self, session: &Session, events: &[EngineEvent]) {
        let layout = &session.config().layout;
        for ev in events {
            match (session.config().mode, ev) {
                (Mode::Accumulator, EngineEvent::FlashOn { t, targets }) => {
                    let target = targets[0];
                    let pos = layout.position(target);
                    let hand = self.choose_hand(pos);
                    let start = *t + self.reaction_time();
                    if self.chance(self.params.error_rate) {
                        let wrong = pick_target(&mut self.rng, layout.len(), Some(target));
                        let after_wrong = self.plan_reach_press(session, start, wrong, hand);
                        self.plan_reach_press(session, after_wrong, target, hand);
                    } else {
                        self.plan_reach_press(session, start, target, hand);
                    }
                }
                (Mode::Reaction, EngineEvent::TrialStart { t, .. }) => self.maybe_false_start(session, *t),
                (Mode::Reaction, EngineEvent::FlashOn { t, .. }) => {
                    if self.planned.is_empty() {
                        let hand = self.choose_hand(None);
                        let rt = self.reaction_time();
                        self.plan(*t + rt, None, hand);
                    }
                }
                (Mode::Sequence, EngineEvent::TrialStart { .. }) => {
                    self.observed.clear();
                    self.repeat_planned = false;
                }
                (Mode::Sequence, EngineEvent::FlashOn { targets, .. }) => {
                    self.observed.extend(targets.iter().copied());
                }
                _ => {}
            }
        }
        if session.awaiting_repeat() && !self.repeat_planned {
            self.repeat_planned = true;
            self.plan_repeat(session);
        }
    }

    /// Possibly jumps the gun before the next reaction flash.
    fn maybe_false_start(&mut self, session: &Session, from: Millis) {
        let Some(flash_at) = session.next_event_time() else { return };
        if flash_at <= from || !self.chance(self.params.error_rate) {
            return;
        }
        let window = (flash_at - from).as_ms();
        let t = from + Millis((self.rng.next_unit() * window as f64) as u64).min(Millis(window - 1));
        let hand = self.choose_hand(None);
        self.plan(t, None, hand);
    }

    fn plan_repeat(&mut self, session: &Session) {
        let layout = &session.config().layout;
        let mut cursor = session.clock() + self.reaction_time();
        let pattern = self.observed.clone();
        for target in pattern {
            let hand = self.choose_hand(layout.position(target));
            let pressed = if self.chance(self.params.error_rate) {
                pick_target(&mut self.rng, layout.len(), Some(target))
            } else {
                target
            };
            let t = self.plan_reach_press(session, cursor, pressed, hand);
            if pressed != target {
                break;
            }
            cursor = t + SEQUENCE_DWELL;
        }
    }

    fn press_event(&self, session: &Session, p: PlannedPress) -> PressEvent {
        let hand_pos = match p.target {
            Some(target) => session.config().layout.position(target).expect("target on layout"),
            None => self.hands[p.hand.index()].at(p.t),
        };
        PressEvent {
            t: p.t,
            target: p.target,
            hand: p.hand,
            hand_pos,
        }
    }
}

/// Plays one full session with a simulated player and returns its log.
/// Deterministic in `config.seed` and `params.seed`.
pub fn simulate_session(config: SessionConfig, params: &PlayerParams) -> Result<SessionLog, PlayerError> {
    params.validate()?;
    let id = format!("sim-{}-{:016x}-{:016x}", config.mode, config.seed, params.seed);
    let mut session = Session::with_id(config, id)?;
    let mut player = SimPlayer::new(params.clone());

    let events = session.take_events();
    player.on_events(&session, &events);
    while !session.is_over() {
        let next_press = player.planned.first().map(|p| p.t);
        let next_event = session.next_event_time();
        let press_first = match (next_press, next_event) {
            (Some(tp), Some(te)) => tp < te,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!("session stalled with nothing scheduled"),
        };
        if press_first {
            let planned = player.planned.remove(0);
            let press = player.press_event(&session, planned);
            let outcome = session.handle_press(press)?;
            let events = session.take_events();
            player.on_events(&session, &events);
            if session.config().mode == Mode::Reaction && outcome.kind == OutcomeKind::FalseStart {
                let now = session.clock();
                player.maybe_false_start(&session, now);
            }
        } else {
            let events = session.advance(next_event.expect("checked above"))?;
            player.on_events(&session, &events);
        }
    }

    let end = session.ended_at().expect("loop exits when over");
    let mut t = Millis::ZERO;
    while t < end {
        for hand in Hand::BOTH {
            let pos = player.hands[hand.index()].at(t);
            session.record_hand_sample(HandSample { t, hand, pos })?;
        }
        t = t + SAMPLE_INTERVAL;
    }
    Ok(session.to_log()?)
}
