//! Headless lightboard reaction game: layouts, a deterministic engine for the
//! reaction, accumulator and sequence modes, the `.vhb.json` session log,
//! analytics over logs and a simulated player.
//!
//! Geometry and statistics are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the `f64` instantiations the rest of the crate uses.

pub mod config;
pub mod engine;
pub mod geometry;
pub mod input;
pub mod insights;
pub mod layout;
pub mod log;
pub mod player;
pub mod replay;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod time;

pub use scalar::Scalar;

/// Board-frame position in meters.
pub type Position3 = geometry::Vec3<f64>;
/// Single-precision position, for callers that store large sample streams.
pub type Position3f = geometry::Vec3<f32>;
/// Hypothesis-test result in double precision.
pub type CohortStats = stats::CohortStats<f64>;

pub use config::{Mode, SessionConfig};
pub use engine::{new_session, EngineError, EngineEvent, OutcomeKind, PressOutcome, Session};
pub use input::{Hand, HandSample, PressEvent};
pub use layout::{layout, scale_layout, LayoutError, LayoutName, LayoutSpec, TargetId};
pub use log::{LogError, SessionLog, Snapshot};
pub use replay::{replay, ReplayError};
pub use time::Millis;
