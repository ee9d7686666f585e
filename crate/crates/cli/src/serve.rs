//! Local HTTP backend for the drag UI.
//!
//! The loaded ERP image is immutable shared state; every handler is otherwise
//! stateless. CPU-heavy work runs on the blocking pool.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use image::RgbImage;
use omnimotion_core::erp_ops::{render_viewport, DEFAULT_FOV_DEG, DEFAULT_VIEWPORT_SIZE};
use omnimotion_core::sme::{estimate_trajectories, DragDocument};
use omnimotion_core::{ErrorKind, FrameGeometry, TrajectorySet};
use serde::Deserialize;
use serde_json::json;

use crate::commands::{run_meta, sha256_hex};
use crate::error::{CliError, Result};

/// Largest viewport side the server will render.
pub const MAX_VIEWPORT_SIZE: u32 = 4096;

pub struct AppState {
    image: RgbImage,
    png: Vec<u8>,
    geometry: FrameGeometry,
    export_dir: PathBuf,
}

impl AppState {
    pub fn new(image: RgbImage, frames: u32, export_dir: PathBuf) -> Result<Self> {
        let geometry = FrameGeometry::new(image.width(), image.height(), frames)?;
        geometry.require_motion()?;
        let mut png = Vec::new();
        image.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)?;
        Ok(Self {
            image,
            png,
            geometry,
            export_dir,
        })
    }

    pub fn load(erp: &Path, frames: u32, export_dir: PathBuf) -> Result<Self> {
        std::fs::metadata(erp).map_err(|e| CliError::io(erp, e))?;
        Self::new(image::open(erp)?.to_rgb8(), frames, export_dir)
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<omnimotion_core::Error> for ApiError {
    fn from(e: omnimotion_core::Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Parse => StatusCode::BAD_REQUEST,
            ErrorKind::Domain => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Io => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<omnimotion_core::FormatError> for ApiError {
    fn from(e: omnimotion_core::FormatError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, format!("parse error (code {}): {e}", e.code()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/erp", get(get_erp))
        .route("/meta", get(get_meta))
        .route("/estimate", post(post_estimate))
        .route("/viewport", get(get_viewport))
        .route("/export", post(post_export))
        .with_state(Arc::new(state))
}

async fn get_erp(State(s): State<Shared>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], s.png.clone()).into_response()
}

async fn get_meta(State(s): State<Shared>) -> Response {
    let g = s.geometry;
    Json(json!({ "W": g.width(), "H": g.height(), "L": g.frames() })).into_response()
}

fn check_frame(s: &AppState, g: &FrameGeometry) -> Result<(), ApiError> {
    if (g.width(), g.height()) != (s.geometry.width(), s.geometry.height()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!(
                "document is {}x{}, loaded image is {}x{}",
                g.width(),
                g.height(),
                s.geometry.width(),
                s.geometry.height()
            ),
        ));
    }
    Ok(())
}

fn json_text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn post_estimate(State(s): State<Shared>, body: String) -> Result<Response, ApiError> {
    let doc = DragDocument::from_json(&body)?;
    check_frame(&s, &doc.geometry)?;
    let meta = run_meta("serve/estimate", 0, json!({ "L": doc.geometry.frames() }));
    let set = estimate_trajectories(&doc.pairs, &doc.geometry)?.with_meta(meta);
    Ok(json_text(set.to_json()))
}

#[derive(Debug, Deserialize)]
pub struct ViewportQuery {
    #[serde(default)]
    yaw: f64,
    #[serde(default)]
    pitch: f64,
    fov: Option<f64>,
    size: Option<u32>,
}

async fn get_viewport(State(s): State<Shared>, Query(q): Query<ViewportQuery>) -> Result<Response, ApiError> {
    let size = q.size.unwrap_or(DEFAULT_VIEWPORT_SIZE);
    if size > MAX_VIEWPORT_SIZE {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("size {size} exceeds {MAX_VIEWPORT_SIZE}"),
        ));
    }
    let spec = omnimotion_core::erp_ops::ViewportSpec::new(
        q.yaw.to_radians(),
        q.pitch.to_radians(),
        q.fov.unwrap_or(DEFAULT_FOV_DEG).to_radians(),
        size,
        size,
    )?;
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, omnimotion_core::Error> {
        let view = render_viewport(&s.image, &spec)?;
        let mut png = Vec::new();
        view.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)?;
        Ok(png)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn post_export(State(s): State<Shared>, body: String) -> Result<Response, ApiError> {
    let set = TrajectorySet::from_json(&body)?;
    check_frame(&s, set.geometry())?;
    let text = set.to_json();
    let name = format!("traj-{}.json", &sha256_hex(text.as_bytes())[..16]);
    let path = s.export_dir.join(name);
    let io = |e: std::io::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    tokio::fs::create_dir_all(&s.export_dir).await.map_err(io)?;
    tokio::fs::write(&path, text).await.map_err(io)?;
    Ok(Json(json!({ "path": path.display().to_string() })).into_response())
}

/// Binds `host:port` and serves until interrupted.
pub async fn serve(state: AppState, host: &str, port: u16) -> Result<()> {
    let addr = format!("{host}:{port}");
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| CliError::io(&addr, e))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::io(&addr, e))?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::io(&addr, e))
}
