//! The gateway as an HTTP reverse proxy: accepts the assistant wire format
//! from the IDE plugin, runs the manipulation loop, forwards upstream, and
//! returns the back-translated suggestion.

use crate::providers::{SharedAssistant, SharedEmbedder};
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use promptcloak_core::assist::{AssistantClient, CompletionRequest};
use promptcloak_core::gateway::{Gateway, GatewayConfig, GatewayPolicy, Session};
use promptcloak_core::manip::offset_to_cursor;
use promptcloak_core::PromptRecord;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, RwLock};
use tracing::{error, info, warn};

pub type SharedPolicy = Arc<dyn GatewayPolicy + Send + Sync>;

pub struct ServerState {
    gateway: Gateway<SharedAssistant, SharedEmbedder>,
    /// Swapped atomically between prompts on reload.
    policy: RwLock<SharedPolicy>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    capture: Option<Mutex<Box<dyn Write + Send>>>,
    record_only: bool,
}

impl ServerState {
    pub fn new(
        assistant: SharedAssistant,
        embedder: SharedEmbedder,
        policy: SharedPolicy,
        config: GatewayConfig,
        capture: Option<Box<dyn Write + Send>>,
        record_only: bool,
    ) -> Self {
        ServerState {
            gateway: Gateway::new(assistant, embedder, config),
            policy: RwLock::new(policy),
            sessions: Mutex::new(HashMap::new()),
            capture: capture.map(Mutex::new),
            record_only,
        }
    }

    pub fn swap_policy(&self, policy: SharedPolicy) {
        *self.policy.write().expect("policy lock") = policy;
    }

    fn session(&self, id: &str) -> Arc<Mutex<Session>> {
        self.sessions
            .lock()
            .expect("session table lock")
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(Session::new(id))))
            .clone()
    }

    fn capture_record(&self, record: &PromptRecord) {
        if let Some(sink) = &self.capture {
            let mut sink = sink.lock().expect("capture lock");
            if let Ok(line) = serde_json::to_string(record) {
                let _ = writeln!(sink, "{line}");
                let _ = sink.flush();
            }
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct WireCompletionRequest {
    pub prefix: String,
    pub suffix: String,
    #[serde(default)]
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct WireCompletionResponse {
    pub text: String,
    pub token_count: usize,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub privacy_disabled: bool,
}

#[derive(Debug, Serialize)]
struct WireError {
    error: String,
}

pub fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/complete", post(complete))
        .with_state(state)
}

async fn healthz() -> &'static str {
    "ok"
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn header_str(headers: &HeaderMap, name: &str, default: &str) -> String {
    headers
        .get(name)
        .and_then(|v| v.to_str().ok())
        .unwrap_or(default)
        .to_string()
}

async fn complete(
    State(state): State<Arc<ServerState>>,
    headers: HeaderMap,
    Json(wire): Json<WireCompletionRequest>,
) -> Response {
    let session_id = header_str(&headers, "x-session-id", "default");
    let file_path = header_str(&headers, "x-file-path", "");

    let result = tokio::task::spawn_blocking(move || {
        let text = format!("{}{}", wire.prefix, wire.suffix);
        let cursor = offset_to_cursor(&text, wire.prefix.len());
        let record = PromptRecord {
            session_id: session_id.clone(),
            file_path,
            text,
            cursor_line: cursor.line,
            cursor_col: cursor.col,
            timestamp: now_ms(),
        };

        if state.record_only {
            // Capture-only arm: originals observed, nothing manipulated.
            state.capture_record(&record);
            let request = CompletionRequest {
                prefix: wire.prefix,
                suffix: wire.suffix,
                max_tokens: wire
                    .max_tokens
                    .unwrap_or(state.gateway.config().max_suggestion_tokens),
            };
            return state
                .gateway
                .assistant()
                .complete(&request)
                .map(|s| WireCompletionResponse {
                    text: s.text,
                    token_count: s.token_count,
                    privacy_disabled: true,
                })
                .map_err(|e| e.to_string());
        }

        let policy = state.policy.read().expect("policy lock").clone();
        let session = state.session(&session_id);
        let mut session = session.lock().expect("session lock");
        match state.gateway.handle_prompt(&*policy, &mut session, &record) {
            Ok(out) => {
                state.capture_record(&PromptRecord {
                    text: out.upstream_prompt.clone(),
                    ..record
                });
                if out.privacy_disabled {
                    warn!(session = %session.session_id, "fail-open forwarded an original prompt");
                }
                Ok(WireCompletionResponse {
                    text: out.suggestion.text,
                    token_count: out.suggestion.token_count,
                    privacy_disabled: out.privacy_disabled,
                })
            }
            Err(e) => Err(e.to_string()),
        }
    })
    .await;

    match result {
        Ok(Ok(reply)) => (StatusCode::OK, Json(reply)).into_response(),
        Ok(Err(message)) => {
            error!(%message, "completion failed");
            (StatusCode::BAD_GATEWAY, Json(WireError { error: message })).into_response()
        }
        Err(join_err) => {
            error!(error = %join_err, "gateway task panicked");
            (
                StatusCode::INTERNAL_SERVER_ERROR,
                Json(WireError { error: "internal gateway failure".into() }),
            )
                .into_response()
        }
    }
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<ServerState>, listen_addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen_addr).await?;
    info!(addr = %listener.local_addr()?, "gateway listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            info!("shutting down");
        })
        .await?;
    Ok(())
}
