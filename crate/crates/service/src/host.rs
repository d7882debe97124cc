//! Transport-independent session host: decodes client frames, keeps the
//! authoritative clock, drives the engine and produces outbound frames.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use vhb_core::config::{Mode, SessionConfig};
use vhb_core::engine::{EngineEvent, OutcomeKind, Session};
use vhb_core::layout::{scale_layout, LayoutName};
use vhb_core::log::{serialize, LayoutRecord, SessionLog, LOG_EXTENSION};
use vhb_core::{HandSample, Millis, PressEvent};

use crate::protocol::{ClientMessage, ErrorCode, Frame, HostState, ServerMessage, PROTOCOL_VERSION};

/// Largest accepted difference between a client timestamp and server receipt time.
pub const MAX_SKEW: Millis = Millis::from_ms(250);

pub trait Clock: Send {
    fn now(&self) -> Millis;
}

/// Wall-clock milliseconds since construction.
#[derive(Clone, Debug)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Millis {
        Millis(self.origin.elapsed().as_millis() as u64)
    }
}

/// Hand-driven clock for tests; clones share the same time.
#[derive(Clone, Debug, Default)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn set(&self, t: Millis) {
        self.0.store(t.as_ms(), Ordering::SeqCst);
    }

    pub fn advance(&self, dt: Millis) {
        self.0.fetch_add(dt.as_ms(), Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Millis {
        Millis(self.0.load(Ordering::SeqCst))
    }
}

/// Per-connection settings fixed by the server.
#[derive(Clone, Debug)]
pub struct HostOptions {
    pub session_id: String,
    /// Seed used when the client does not pick one.
    pub default_seed: u64,
    /// Where finished logs go; `None` keeps them in memory only.
    pub log_dir: Option<PathBuf>,
}

/// A client input as it was applied to the engine, with the corrected time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputRecord {
    Press(PressEvent),
    Sample(HandSample),
}

/// Frames to send, and whether to close afterwards.
#[derive(Debug, Default)]
pub struct HostOutput {
    pub frames: Vec<Frame<ServerMessage>>,
    pub close: bool,
}

impl HostOutput {
    pub fn messages(&self) -> impl Iterator<Item = &ServerMessage> {
        self.frames.iter().map(|f| &f.msg)
    }
}

pub struct SessionHost<C: Clock> {
    clock: C,
    opts: HostOptions,
    config: SessionConfig,
    greeted: bool,
    consented: bool,
    closed: bool,
    last_seq: Option<u64>,
    out_seq: u64,
    started_at: Millis,
    engine: Option<Session>,
    finished: Option<SessionLog>,
    transcript: Vec<InputRecord>,
    announced_turn: bool,
    out: Vec<ServerMessage>,
}

fn tooltip(text: &str) -> ServerMessage {
    ServerMessage::Tooltip { text: text.to_owned() }
}

fn instructions(mode: Mode) -> &'static str {
    match mode {
        Mode::Reaction => "Wait for every button to turn orange, then press any button as fast as you can.",
        Mode::Accumulator => "Press each orange button as fast as you can before time runs out.",
        Mode::Sequence => "Watch the pattern of orange buttons, then repeat it in order.",
    }
}

impl<C: Clock> SessionHost<C> {
    pub fn new(clock: C, opts: HostOptions) -> Self {
        let config = SessionConfig::default().with_seed(opts.default_seed);
        Self {
            clock,
            opts,
            config,
            greeted: false,
            consented: false,
            closed: false,
            last_seq: None,
            out_seq: 0,
            started_at: Millis::ZERO,
            engine: None,
            finished: None,
            transcript: Vec::new(),
            announced_turn: false,
            out: Vec::new(),
        }
    }

    pub fn session_id(&self) -> &str {
        &self.opts.session_id
    }

    pub fn now(&self) -> Millis {
        self.clock.now()
    }

    pub fn state(&self) -> HostState {
        match &self.engine {
            None => HostState::Lobby,
            Some(s) if s.is_over() => HostState::Over,
            Some(_) => HostState::Playing,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// The config the next (or current) game uses.
    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// The finished game's log, once game over has been reached.
    pub fn finished_log(&self) -> Option<&SessionLog> {
        self.finished.as_ref()
    }

    /// Inputs applied to the current game, in order.
    pub fn transcript(&self) -> &[InputRecord] {
        &self.transcript
    }

    /// Host-clock time of the next scheduled engine event.
    pub fn next_deadline(&self) -> Option<Millis> {
        let engine = self.engine.as_ref()?;
        engine.next_event_time().map(|t| self.started_at + t)
    }

    fn session_now(&self) -> Millis {
        self.clock.now().saturating_sub(self.started_at)
    }

    fn flush(&mut self, close: bool) -> HostOutput {
        if close {
            self.closed = true;
        }
        let frames = self
            .out
            .drain(..)
            .map(|msg| {
                self.out_seq += 1;
                Frame { seq: self.out_seq, msg }
            })
            .collect();
        HostOutput { frames, close }
    }

    fn fail(&mut self, code: ErrorCode, message: impl Into<String>) -> HostOutput {
        self.out.push(ServerMessage::error(code, message));
        self.flush(code.is_fatal())
    }

    /// A frame that is not text cannot carry a message.
    pub fn handle_binary(&mut self) -> HostOutput {
        self.fail(ErrorCode::Malformed, "binary frames are not supported")
    }

    pub fn handle_text(&mut self, text: &str) -> HostOutput {
        if self.closed {
            return HostOutput { frames: Vec::new(), close: true };
        }
        let frame = match Frame::<ClientMessage>::parse(text) {
            Ok(f) => f,
            Err(e) => return self.fail(e.code, e.message),
        };
        if let Some(last) = self.last_seq {
            if frame.seq <= last {
                return self.fail(ErrorCode::BadSeq, format!("seq {} does not follow {last}", frame.seq));
            }
        }
        self.last_seq = Some(frame.seq);
        self.handle_message(frame.msg)
    }

    pub fn handle_message(&mut self, msg: ClientMessage) -> HostOutput {
        if !self.greeted && !matches!(msg, ClientMessage::Hello { .. }) {
            return self.fail(ErrorCode::HelloRequired, "the first message must be hello");
        }
        match msg {
            ClientMessage::Hello { .. } => self.on_hello(),
            ClientMessage::ConsentAck {} => {
                self.consented = true;
                self.push_state();
                self.flush(false)
            }
            ClientMessage::SelectMode {
                mode,
                layout,
                scale,
                seed,
                reaction_trials,
                accumulator_limit_s,
                flash_interval_bounds_s,
                sequence_max_trials,
            } => {
                match self.state() {
                    HostState::Playing => {
                        return self.fail(ErrorCode::ModeLocked, "the mode cannot change during a game")
                    }
                    HostState::Over => return self.fail(ErrorCode::SessionOver, "the game has ended"),
                    HostState::Lobby => {}
                }
                let name = layout.unwrap_or(self.config.layout.name());
                let spec = match scale_layout(&vhb_core::layout::layout(name), scale.unwrap_or(1.0)) {
                    Ok(s) => s,
                    Err(e) => return self.fail(ErrorCode::InvalidConfig, e.to_string()),
                };
                let mut cfg = SessionConfig::new(mode, spec).with_seed(seed.unwrap_or(self.opts.default_seed));
                if let Some(n) = reaction_trials {
                    cfg.reaction_trials = n;
                }
                if let Some(limit) = accumulator_limit_s {
                    cfg.accumulator_limit = limit;
                }
                if let Some(bounds) = flash_interval_bounds_s {
                    cfg.flash_interval_bounds = bounds;
                }
                if let Some(n) = sequence_max_trials {
                    cfg.sequence_max_trials = n;
                }
                self.on_select(cfg)
            }
            ClientMessage::Start {} => self.on_start(),
            ClientMessage::Press { t, target, hand, pos } => {
                self.on_press(PressEvent { t, target, hand, hand_pos: pos })
            }
            ClientMessage::HandSample { t, hand, pos } => self.on_sample(HandSample { t, hand, pos }),
            ClientMessage::Bye {} => self.flush(true),
        }
    }

    /// Fires engine events that are due on the host clock.
    pub fn tick(&mut self) -> HostOutput {
        if self.state() == HostState::Playing {
            let engine = self.engine.as_ref().expect("playing");
            let now = self.session_now().max(engine.clock());
            match self.engine.as_mut().expect("playing").advance(now) {
                Ok(events) => self.push_events(events),
                Err(e) => self.out.push(ServerMessage::error(ErrorCode::BadEvent, e.to_string())),
            }
        }
        self.flush(false)
    }

    fn push_state(&mut self) {
        let (score, trial, awaiting_repeat) = match &self.engine {
            Some(s) => (s.score(), s.trial_index(), s.awaiting_repeat()),
            None => (0, 0, false),
        };
        self.out.push(ServerMessage::State {
            state: self.state(),
            mode: self.config.mode,
            layout: LayoutRecord::from(&self.config.layout),
            consented: self.consented,
            score,
            trial,
            awaiting_repeat,
        });
    }

    fn on_hello(&mut self) -> HostOutput {
        if self.greeted {
            return self.fail(ErrorCode::DuplicateHello, "hello was already received");
        }
        self.greeted = true;
        self.out.push(ServerMessage::Welcome {
            session_id: self.opts.session_id.clone(),
            protocol_version: PROTOCOL_VERSION,
            consent_required: true,
            modes: Mode::ALL.to_vec(),
            layouts: LayoutName::ALL.to_vec(),
        });
        self.push_state();
        self.out.push(tooltip(
            "Presses and hand movements in this session are recorded. Acknowledge to continue.",
        ));
        self.flush(false)
    }

    fn on_select(&mut self, cfg: SessionConfig) -> HostOutput {
        if let Err(e) = cfg.validate() {
            return self.fail(ErrorCode::InvalidConfig, e.to_string());
        }
        let mode = cfg.mode;
        self.config = cfg;
        self.push_state();
        self.out.push(tooltip(instructions(mode)));
        self.flush(false)
    }

    fn on_start(&mut self) -> HostOutput {
        match self.state() {
            HostState::Playing => return self.fail(ErrorCode::AlreadyStarted, "the game is running"),
            HostState::Over => return self.fail(ErrorCode::SessionOver, "the game has ended"),
            HostState::Lobby => {}
        }
        if !self.consented {
            return self.fail(ErrorCode::ConsentRequired, "acknowledge data collection before starting");
        }
        let mut engine = match Session::with_id(self.config.clone(), self.opts.session_id.clone()) {
            Ok(s) => s,
            Err(e) => return self.fail(ErrorCode::InvalidConfig, e.to_string()),
        };
        self.started_at = self.clock.now();
        // the opening TrialStart produces the playing state frame
        let events = engine.advance(Millis::ZERO).expect("fresh session accepts t = 0");
        self.engine = Some(engine);
        self.push_events(events);
        self.out.push(tooltip(instructions(self.config.mode)));
        self.flush(false)
    }

    /// Server receipt time, with the client stamp trusted within the skew bound.
    fn corrected(&self, client_t: Millis) -> Millis {
        let r = self.session_now();
        client_t.clamp(r.saturating_sub(MAX_SKEW), r + MAX_SKEW)
    }

    fn on_press(&mut self, mut e: PressEvent) -> HostOutput {
        match self.state() {
            HostState::Lobby => return self.fail(ErrorCode::NotPlaying, "no game is running"),
            HostState::Over => {
                let engine = self.engine.as_ref().expect("over");
                self.out.push(ServerMessage::Outcome {
                    t: engine.ended_at().expect("over"),
                    kind: OutcomeKind::Ignored,
                    target: e.target,
                    score: engine.score(),
                    trial: engine.trial_index(),
                });
                return self.flush(false);
            }
            HostState::Playing => {}
        }
        let clock = self.engine.as_ref().expect("playing").clock();
        e.t = self.corrected(e.t).max(clock);
        if let Some(target) = e.target {
            if !self.config.layout.contains(target) {
                return self.fail(ErrorCode::BadEvent, format!("target {target} is not on this layout"));
            }
        }
        if !e.hand_pos.is_finite() {
            return self.fail(ErrorCode::BadEvent, "non-finite hand position");
        }
        let engine = self.engine.as_mut().expect("playing");
        let before = match engine.advance(e.t) {
            Ok(ev) => ev,
            Err(err) => return self.fail(ErrorCode::BadEvent, err.to_string()),
        };
        self.push_events(before);
        let engine = self.engine.as_mut().expect("playing");
        let outcome = match engine.handle_press(e) {
            Ok(o) => o,
            Err(err) => return self.fail(ErrorCode::BadEvent, err.to_string()),
        };
        let after = engine.take_events();
        self.transcript.push(InputRecord::Press(e));
        self.out.push(ServerMessage::Outcome {
            t: e.t,
            kind: outcome.kind,
            target: e.target,
            score: outcome.score_after,
            trial: outcome.trial_index,
        });
        match outcome.kind {
            OutcomeKind::FalseStart => self.out.push(tooltip("Too early. Wait for the lights.")),
            OutcomeKind::Miss if self.config.mode == Mode::Accumulator => {
                self.out.push(tooltip("Only the orange button scores."))
            }
            _ => {}
        }
        self.push_events(after);
        self.flush(false)
    }

    fn on_sample(&mut self, mut s: HandSample) -> HostOutput {
        match self.state() {
            HostState::Lobby => return self.fail(ErrorCode::NotPlaying, "no game is running"),
            // late samples after the log has been written are dropped
            HostState::Over => return self.flush(false),
            HostState::Playing => {}
        }
        s.t = self.corrected(s.t);
        let engine = self.engine.as_mut().expect("playing");
        if let Err(err) = engine.record_hand_sample(s) {
            return self.fail(ErrorCode::BadEvent, err.to_string());
        }
        let events = engine.take_events();
        self.transcript.push(InputRecord::Sample(s));
        self.push_events(events);
        self.flush(false)
    }

    fn push_events(&mut self, events: Vec<EngineEvent>) {
        for ev in events {
            match ev {
                EngineEvent::TrialStart { .. } => {
                    self.announced_turn = false;
                    self.push_state();
                }
                EngineEvent::FlashOn { t, targets } => self.out.push(ServerMessage::FlashOn { t, targets }),
                EngineEvent::FlashOff { t, targets } => self.out.push(ServerMessage::FlashOff { t, targets }),
                EngineEvent::GameOver { score, .. } => self.finish(score),
            }
        }
        let awaiting = self.engine.as_ref().is_some_and(|s| s.awaiting_repeat());
        if awaiting && !self.announced_turn {
            self.announced_turn = true;
            self.push_state();
            self.out.push(tooltip("Your turn: repeat the pattern."));
        }
    }

    fn finish(&mut self, score: u32) {
        let log = self.engine.as_ref().expect("over").to_log().expect("finished session has a log");
        if let Some(dir) = &self.opts.log_dir {
            if let Err(e) = write_log(dir, &log) {
                tracing::error!(session = %log.session_id, "writing log: {e}");
                self.out.push(ServerMessage::error(ErrorCode::LogWriteFailed, e.to_string()));
            }
        }
        self.push_state();
        self.out.push(ServerMessage::GameOver { score, log_id: log.session_id.clone() });
        self.finished = Some(log);
    }
}

/// Writes `<dir>/<session_id>.vhb.json`, refusing to overwrite.
pub fn write_log(dir: &std::path::Path, log: &SessionLog) -> std::io::Result<PathBuf> {
    let bytes = serialize(log).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.{LOG_EXTENSION}", log.session_id));
    let mut file = OpenOptions::new().write(true).create_new(true).open(&path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(path)
}
