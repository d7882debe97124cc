//! WebSocket transport: `/v1/session` and `/healthz`.

use std::future::pending;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

use crate::host::{HostOptions, HostOutput, MonotonicClock, SessionHost};
use crate::protocol::{ErrorCode, Frame, ServerMessage};
use crate::registry::SessionRegistry;

pub const DEFAULT_PORT: u16 = 8472;
pub const DEFAULT_CAPACITY: usize = 64;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub log_dir: PathBuf,
    pub capacity: usize,
}

#[derive(Clone)]
struct AppState {
    registry: SessionRegistry,
    log_dir: Arc<PathBuf>,
}

pub fn router(config: ServiceConfig) -> Router {
    let state = AppState {
        registry: SessionRegistry::new(config.capacity),
        log_dir: Arc::new(config.log_dir),
    };
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/session", get(upgrade))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    std::fs::create_dir_all(&config.log_dir)?;
    axum::serve(listener, router(config)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_connection(socket, state))
}

async fn send(socket: &mut WebSocket, out: &HostOutput) -> bool {
    for frame in &out.frames {
        if socket.send(Message::Text(frame.to_json().into())).await.is_err() {
            return false;
        }
    }
    true
}

async fn run_connection(mut socket: WebSocket, state: AppState) {
    let ticket = match state.registry.open() {
        Ok(t) => t,
        Err(busy) => {
            let frame = Frame { seq: 1, msg: ServerMessage::error(ErrorCode::Busy, busy.to_string()) };
            let _ = socket.send(Message::Text(frame.to_json().into())).await;
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
    };
    tracing::info!(session = %ticket.session_id, "session opened");
    let clock = MonotonicClock::new();
    let mut host = SessionHost::new(
        clock.clone(),
        HostOptions {
            session_id: ticket.session_id.clone(),
            default_seed: ticket.seed,
            log_dir: Some(state.log_dir.as_ref().clone()),
        },
    );
    loop {
        let deadline = host.next_deadline();
        let timer = async {
            match deadline {
                Some(d) => {
                    let wait = d.saturating_sub(host_now(&clock)).as_ms();
                    tokio::time::sleep(std::time::Duration::from_millis(wait)).await
                }
                None => pending().await,
            }
        };
        let out = tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => host.handle_text(text.as_str()),
                Some(Ok(Message::Binary(_))) => host.handle_binary(),
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
            },
            _ = timer => host.tick(),
        };
        if !send(&mut socket, &out).await {
            break;
        }
        if out.close {
            let _ = socket.send(Message::Close(None)).await;
            break;
        }
    }
    tracing::info!(session = %ticket.session_id, "session closed");
}

fn host_now(clock: &MonotonicClock) -> vhb_core::Millis {
    use crate::host::Clock;
    clock.now()
}
