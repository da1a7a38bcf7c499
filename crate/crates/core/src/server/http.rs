use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::catalogue::JobParams;
use super::jobs::{JobError, JobService};
use super::session::{Peer, SessionRelay};
use crate::graph::GraphError;
use crate::layout::LayoutParams;
use crate::protocol::decode_bridge_frames;
use crate::sampler::{SampleSpec, Scheme};

#[derive(Clone)]
pub struct AppState {
    pub jobs: Arc<JobService>,
    pub relay: Arc<SessionRelay>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/jobs", post(submit).get(list))
        .route("/jobs/{id}", get(status))
        .route("/jobs/{id}/result", get(result))
        .route("/session", get(session))
        .with_state(state)
}

/// Query fields of `POST /jobs`. Layout fields default to the library defaults; giving
/// `scheme` turns sampling on and then requires `p`.
#[derive(Debug, Default, Deserialize)]
pub struct SubmitQuery {
    pub iters: Option<usize>,
    pub cooling: Option<f64>,
    pub seed: Option<u64>,
    pub t0: Option<f64>,
    pub side: Option<f64>,
    pub scheme: Option<String>,
    pub p: Option<f64>,
    pub fraction: Option<f64>,
    pub sample_seed: Option<u64>,
}

impl SubmitQuery {
    pub fn to_params(&self) -> Result<JobParams, String> {
        let d = LayoutParams::default();
        let layout = LayoutParams {
            max_iterations: self.iters.unwrap_or(d.max_iterations),
            cooling_exponent: self.cooling.unwrap_or(d.cooling_exponent),
            initial_temperature: self.t0.or(d.initial_temperature),
            volume_side: self.side.unwrap_or(d.volume_side),
            rng_seed: self.seed.unwrap_or(d.rng_seed),
        };
        let sample = match &self.scheme {
            None => None,
            Some(s) => {
                let scheme: Scheme = s.parse().map_err(|e: crate::sampler::SampleError| e.to_string())?;
                let p = self.p.ok_or("sampling needs p")?;
                Some(SampleSpec {
                    scheme,
                    p,
                    target_fraction: self.fraction.unwrap_or(0.15),
                    rng_seed: self.sample_seed.unwrap_or(0),
                })
            }
        };
        Ok(JobParams { layout, sample })
    }
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

fn job_error(e: JobError) -> Response {
    match &e {
        JobError::InvalidGraph(g) => {
            let mut body = json!({ "error": e.to_string() });
            if let GraphError::Parse { offset, .. } = g {
                body["offset"] = json!(offset);
            }
            error(StatusCode::BAD_REQUEST, body)
        }
        JobError::InvalidParams(_) => error(StatusCode::BAD_REQUEST, json!({ "error": e.to_string() })),
        JobError::NotFound(_) => error(StatusCode::NOT_FOUND, json!({ "error": e.to_string() })),
        JobError::NotDone { state, .. } => error(
            StatusCode::CONFLICT,
            json!({ "error": e.to_string(), "state": state }),
        ),
        _ => error(
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({ "error": e.to_string() }),
        ),
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn submit(State(s): State<AppState>, Query(q): Query<SubmitQuery>, body: Bytes) -> Response {
    let params = match q.to_params() {
        Ok(p) => p,
        Err(msg) => return error(StatusCode::BAD_REQUEST, json!({ "error": msg })),
    };
    let jobs = s.jobs.clone();
    match tokio::task::spawn_blocking(move || jobs.submit(&body, params)).await {
        Ok(Ok(id)) => (StatusCode::ACCEPTED, Json(json!({ "job_id": id }))).into_response(),
        Ok(Err(e)) => job_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })),
    }
}

async fn list(State(s): State<AppState>) -> Response {
    Json(s.jobs.list()).into_response()
}

async fn status(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    match s.jobs.status(&id) {
        Ok(j) => Json(j).into_response(),
        Err(e) => job_error(e),
    }
}

async fn result(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    match s.jobs.fetch_result(&id) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => job_error(e),
    }
}

async fn session(State(s): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| bridge(socket, s.relay))
}

/// Each binary WebSocket message carries one or more length-prefixed datagrams, in both
/// directions. Frames may also be split across messages.
async fn bridge(mut socket: WebSocket, relay: Arc<SessionRelay>) {
    let (id, mut outbound) = relay.open_bridge();
    let mut pending: Vec<u8> = Vec::new();
    loop {
        tokio::select! {
            frame = outbound.recv() => {
                let Some(frame) = frame else { break };
                if socket.send(WsMessage::Binary(frame.into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => {
                match msg {
                    Some(Ok(WsMessage::Binary(b))) => {
                        pending.extend_from_slice(&b);
                        let (frames, used) = decode_bridge_frames(&pending);
                        for f in frames {
                            relay.ingest(Peer::Bridge(id), f);
                        }
                        pending.drain(..used);
                    }
                    Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => {}
                }
            }
        }
    }
    relay.close_bridge(id);
}
