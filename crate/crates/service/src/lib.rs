//! Live session service for the lightboard game.

pub mod host;
pub mod protocol;
pub mod registry;
pub mod server;

pub use host::{Clock, HostOptions, HostOutput, InputRecord, ManualClock, MonotonicClock, SessionHost, MAX_SKEW};
pub use protocol::{ClientMessage, ErrorCode, Frame, HostState, ServerMessage, PROTOCOL_VERSION};
pub use registry::{Busy, SessionRegistry, SessionTicket};
pub use server::{router, serve, ServiceConfig, DEFAULT_CAPACITY, DEFAULT_PORT};
