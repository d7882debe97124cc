//! Re-executes a log's inputs through a fresh engine.

use thiserror::Error;

use crate::engine::{EngineError, Session};
use crate::input::{HandSample, PressEvent};
use crate::log::{LogError, SessionLog};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

enum Input {
    Press(PressEvent),
    Sample(HandSample),
}

/// Feeds the logged presses and hand samples, merged by time, into a new
/// session built from the logged config, then runs it to completion. A log
/// produced by the engine replays to itself.
pub fn replay(log: &SessionLog) -> Result<SessionLog, ReplayError> {
    let config = log.session_config()?;
    let mut session = Session::with_id(config, log.session_id.clone())?;
    session.advance(crate::time::Millis::ZERO)?;

    let mut inputs: Vec<(crate::time::Millis, u8, usize, Input)> = Vec::new();
    for (i, p) in log.presses.iter().enumerate() {
        inputs.push((p.t, 1, i, Input::Press(*p)));
    }
    for (i, s) in log.hand_samples.iter().enumerate() {
        inputs.push((s.t, 0, i, Input::Sample(*s)));
    }
    // stable on ties: samples first, then each stream in its logged order
    inputs.sort_by_key(|(t, kind, i, _)| (*t, *kind, *i));

    for (_, _, _, input) in inputs {
        match input {
            Input::Press(p) => {
                session.handle_press(p)?;
                session.take_events();
            }
            Input::Sample(s) => session.record_hand_sample(s)?,
        }
    }
    while !session.is_over() {
        let Some(next) = session.next_event_time() else {
            return Err(EngineError::NotFinished.into());
        };
        session.advance(next)?;
    }
    Ok(session.to_log()?)
}
