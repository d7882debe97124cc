//! Wire messages. Every frame is one JSON object with a `type` tag and a `seq`
//! number; client and server number their own frames independently.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use vhb_core::config::Mode;
use vhb_core::engine::OutcomeKind;
use vhb_core::layout::{LayoutName, TargetId};
use vhb_core::log::LayoutRecord;
use vhb_core::{Hand, Millis, Position3};

pub const PROTOCOL_VERSION: u32 = 1;

/// Client-to-server messages. Times are seconds since the server's start
/// acknowledgement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
    },
    ConsentAck {},
    SelectMode {
        mode: Mode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<LayoutName>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reaction_trials: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accumulator_limit_s: Option<Millis>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flash_interval_bounds_s: Option<(Millis, Millis)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sequence_max_trials: Option<u32>,
    },
    Start {},
    Press {
        t: Millis,
        target: Option<TargetId>,
        hand: Hand,
        pos: Position3,
    },
    HandSample {
        t: Millis,
        hand: Hand,
        pos: Position3,
    },
    Bye {},
}

impl ClientMessage {
    pub const TYPES: [&'static str; 7] = [
        "hello",
        "consent_ack",
        "select_mode",
        "start",
        "press",
        "hand_sample",
        "bye",
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostState {
    /// Connected; consent and mode selection happen here.
    Lobby,
    Playing,
    Over,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownType,
    BadSeq,
    HelloRequired,
    DuplicateHello,
    ConsentRequired,
    ModeLocked,
    AlreadyStarted,
    NotPlaying,
    SessionOver,
    InvalidConfig,
    BadEvent,
    Busy,
    LogWriteFailed,
}

impl ErrorCode {
    /// Whether the server closes the connection after sending this error.
    pub fn is_fatal(self) -> bool {
        matches!(
            self,
            ErrorCode::Malformed
                | ErrorCode::UnknownType
                | ErrorCode::BadSeq
                | ErrorCode::HelloRequired
                | ErrorCode::Busy
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    Welcome {
        session_id: String,
        protocol_version: u32,
        consent_required: bool,
        modes: Vec<Mode>,
        layouts: Vec<LayoutName>,
    },
    State {
        state: HostState,
        mode: Mode,
        layout: LayoutRecord,
        consented: bool,
        score: u32,
        trial: u32,
        /// Sequence mode: playback is over and the client should repeat it.
        awaiting_repeat: bool,
    },
    FlashOn {
        t: Millis,
        targets: Vec<TargetId>,
    },
    FlashOff {
        t: Millis,
        targets: Vec<TargetId>,
    },
    Outcome {
        t: Millis,
        kind: OutcomeKind,
        target: Option<TargetId>,
        score: u32,
        trial: u32,
    },
    Tooltip {
        text: String,
    },
    GameOver {
        score: u32,
        log_id: String,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error { code, message: message.into() }
    }
}

/// A numbered frame as it travels on the wire.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<M> {
    pub seq: u64,
    pub msg: M,
}

/// Why an inbound frame could not be decoded.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeError {
    pub code: ErrorCode,
    pub message: String,
}

impl<M: Serialize> Frame<M> {
    /// `{"type": .., "seq": .., ...payload}`.
    pub fn to_json(&self) -> String {
        let mut obj = match serde_json::to_value(&self.msg).expect("message serializes") {
            Value::Object(m) => m,
            _ => unreachable!("messages are tagged objects"),
        };
        let mut out = Map::new();
        if let Some(tag) = obj.shift_remove("type") {
            out.insert("type".into(), tag);
        }
        out.insert("seq".into(), Value::from(self.seq));
        out.extend(obj);
        Value::Object(out).to_string()
    }
}

fn decode<M: for<'de> Deserialize<'de>>(text: &str, types: &[&str]) -> Result<Frame<M>, DecodeError> {
    let malformed = |message: String| DecodeError { code: ErrorCode::Malformed, message };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(malformed("frame is not a JSON object".into()));
    };
    let seq = match obj.remove("seq") {
        Some(v) => v.as_u64().ok_or_else(|| malformed("seq must be a non-negative integer".into()))?,
        None => return Err(malformed("missing seq".into())),
    };
    match obj.get("type") {
        Some(Value::String(t)) if types.contains(&t.as_str()) => {}
        Some(Value::String(t)) => {
            return Err(DecodeError {
                code: ErrorCode::UnknownType,
                message: format!("unknown message type {t:?}"),
            })
        }
        _ => return Err(malformed("missing type".into())),
    }
    let msg = serde_json::from_value(Value::Object(obj)).map_err(|e| malformed(e.to_string()))?;
    Ok(Frame { seq, msg })
}

impl Frame<ClientMessage> {
    pub fn parse(text: &str) -> Result<Self, DecodeError> {
        decode(text, &ClientMessage::TYPES)
    }
}

impl Frame<ServerMessage> {
    pub fn parse(text: &str) -> Result<Self, DecodeError> {
        decode(
            text,
            &[
                "welcome",
                "state",
                "flash_on",
                "flash_off",
                "outcome",
                "tooltip",
                "game_over",
                "error",
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_and_seq_come_first() {
        let f = Frame { seq: 3, msg: ServerMessage::GameOver { score: 7, log_id: "x".into() } };
        assert_eq!(f.to_json(), r#"{"type":"game_over","seq":3,"score":7,"log_id":"x"}"#);
    }

    #[test]
    fn client_frames_round_trip() {
        let msgs = [
            ClientMessage::Hello { client: Some("test".into()) },
            ClientMessage::ConsentAck {},
            ClientMessage::SelectMode {
                mode: Mode::Sequence,
                layout: Some(LayoutName::SmallCircle),
                scale: Some(1.5),
                seed: Some(9),
                reaction_trials: None,
                accumulator_limit_s: Some(Millis(30_000)),
                flash_interval_bounds_s: Some((Millis(1_000), Millis(2_000))),
                sequence_max_trials: None,
            },
            ClientMessage::Start {},
            ClientMessage::Press {
                t: Millis(1_234),
                target: Some(TargetId(3)),
                hand: Hand::Right,
                pos: Position3::new(0.1, 0.2, 0.0),
            },
            ClientMessage::HandSample { t: Millis(1_250), hand: Hand::Left, pos: Position3::zero() },
            ClientMessage::Bye {},
        ];
        for (i, msg) in msgs.into_iter().enumerate() {
            let frame = Frame { seq: i as u64, msg };
            assert_eq!(Frame::<ClientMessage>::parse(&frame.to_json()).unwrap(), frame);
        }
    }

    #[test]
    fn decode_errors() {
        let code = |s: &str| Frame::<ClientMessage>::parse(s).unwrap_err().code;
        assert_eq!(code("{"), ErrorCode::Malformed);
        assert_eq!(code("[]"), ErrorCode::Malformed);
        assert_eq!(code(r#"{"type":"start"}"#), ErrorCode::Malformed);
        assert_eq!(code(r#"{"type":"start","seq":-1}"#), ErrorCode::Malformed);
        assert_eq!(code(r#"{"type":"teleport","seq":1}"#), ErrorCode::UnknownType);
        assert_eq!(code(r#"{"type":"start","seq":1,"extra":true}"#), ErrorCode::Malformed);
        assert_eq!(code(r#"{"type":"press","seq":1,"t":-1,"target":null,"hand":"left","pos":{"x":0,"y":0,"z":0}}"#), ErrorCode::Malformed);
        assert_eq!(code(r#"{"type":"consent_ack","seq":1,"extra":1}"#), ErrorCode::Malformed);
    }

    #[test]
    fn fatal_codes() {
        assert!(ErrorCode::UnknownType.is_fatal());
        assert!(!ErrorCode::ModeLocked.is_fatal());
        assert!(!ErrorCode::ConsentRequired.is_fatal());
    }
}
