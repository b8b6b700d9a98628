//! HTTP interface to a teaching session.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use relspace_core::geometry::Pose;
use relspace_core::session::{Session, SessionError};
use serde::Deserialize;
use serde_json::{json, Value};

pub const DEFAULT_GRID: (usize, usize) = (64, 40);
pub const MAX_GRID_CELLS: usize = 512 * 512;

type Shared = Arc<Mutex<Session>>;

pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self { status, kind: kind.to_owned(), message: message.into() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match &e {
            SessionError::Grounding(g) => Self::new(StatusCode::BAD_REQUEST, g.kind(), message),
            SessionError::UnknownObject(_) => Self::new(StatusCode::NOT_FOUND, "UnknownObject", message),
            SessionError::NoModel(_) => Self::new(StatusCode::NOT_FOUND, "NoModel", message),
            SessionError::NoCommandContext => Self::new(StatusCode::CONFLICT, "NoCommandContext", message),
            SessionError::Geometry(_) => Self::new(StatusCode::BAD_REQUEST, "InvalidGeometry", message),
            SessionError::Memory(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageFailure", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn lock(session: &Shared) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|p| p.into_inner())
}

fn to_json(v: impl serde::Serialize) -> ApiResult {
    serde_json::to_value(v)
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Serialization", e.to_string()))
}

#[derive(Deserialize)]
struct CommandBody {
    text: String,
}

#[derive(Deserialize)]
struct MoveBody {
    id: String,
    position_m: [f64; 3],
    /// Keeps the current orientation when absent.
    orientation_wxyz: Option<[f64; 4]>,
}

#[derive(Deserialize)]
struct GridQuery {
    grid: Option<String>,
}

async fn command(State(s): State<Shared>, Json(body): Json<CommandBody>) -> ApiResult {
    to_json(lock(&s).command(&body.text)?)
}

async fn move_object(State(s): State<Shared>, Json(body): Json<MoveBody>) -> ApiResult {
    let mut session = lock(&s);
    let current = session.scene().pose(&body.id).map_err(|_| SessionError::UnknownObject(body.id.clone()))?;
    let wxyz = body.orientation_wxyz.unwrap_or_else(|| current.wxyz());
    let pose = Pose::from_wxyz(body.position_m, wxyz).map_err(SessionError::from)?;
    session.move_object(&body.id, pose)?;
    to_json(session.state())
}

async fn cue(State(s): State<Shared>) -> ApiResult {
    to_json(lock(&s).cue()?)
}

async fn model(State(s): State<Shared>, Path(relation): Path<String>) -> ApiResult {
    let session = lock(&s);
    let model = session.memory().model(&relation).ok_or(SessionError::NoModel(relation))?;
    to_json(model)
}

fn parse_grid(text: Option<&str>) -> Result<(usize, usize), ApiError> {
    let Some(text) = text else { return Ok(DEFAULT_GRID) };
    let bad = || ApiError::new(StatusCode::BAD_REQUEST, "InvalidGrid", format!("expected WxH, got `{text}`"));
    let (w, h) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 || w.saturating_mul(h) > MAX_GRID_CELLS {
        return Err(bad());
    }
    Ok((w, h))
}

async fn heatmap(State(s): State<Shared>, Path(relation): Path<String>, Query(q): Query<GridQuery>) -> ApiResult {
    let (w, h) = parse_grid(q.grid.as_deref())?;
    to_json(lock(&s).heatmap(&relation, w, h)?)
}

async fn state(State(s): State<Shared>) -> ApiResult {
    to_json(lock(&s).state())
}

async fn reset(State(s): State<Shared>) -> ApiResult {
    let mut session = lock(&s);
    session.reset();
    to_json(session.state())
}

pub fn router(session: Session) -> Router {
    Router::new()
        .route("/command", post(command))
        .route("/scene", post(move_object))
        .route("/cue", post(cue))
        .route("/model/{relation}", get(model))
        .route("/model/{relation}/heatmap", get(heatmap))
        .route("/state", get(state))
        .route("/reset", post(reset))
        .with_state(Arc::new(Mutex::new(session)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid(None).ok(), Some(DEFAULT_GRID));
        assert_eq!(parse_grid(Some("10x4")).ok(), Some((10, 4)));
        assert_eq!(parse_grid(Some("3X2")).ok(), Some((3, 2)));
        for bad in ["10", "0x4", "ax4", "10x", "100000x100000"] {
            assert!(parse_grid(Some(bad)).is_err(), "{bad}");
        }
    }
}
