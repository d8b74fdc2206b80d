//! HTTP API for the match-review UI.
//!
//! ```text
//! GET  /api/granules
//! GET  /api/granules/{id}
//! GET  /api/granules/{id}/band/{b}.png?lo=2&hi=98
//! GET  /api/granules/{id}/annotations
//! GET  /api/granules/{id}/candidates
//! POST /api/decisions
//! ```
//!
//! Reads serve the last committed snapshot; decisions go through the single
//! writer in [`crate::review::Store`].

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ais::{candidates_for_granule, filter_records, read_ais_csv, AisError, AisRecord, Footprint, GranuleBoxes};
use crate::ais::{MatchConfig, MatchMode};
use crate::aiscoco::AiscocoDoc;
use crate::raster::{load_granule, read_band_tiff, stretch_to_png, MetaFile};
use crate::review::{display_status, review_state, CandidateRecords, ReviewDecision, ReviewError, Store};

/// Environment variable that overrides the annotation store path.
pub const STORE_ENV: &str = "RAWSEA_STORE";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("store is locked: {0}")]
    StoreLocked(PathBuf),
    #[error(transparent)]
    Review(ReviewError),
    #[error(transparent)]
    Ais(#[from] AisError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ReviewError> for ServeError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::StoreLocked(p) => ServeError::StoreLocked(p),
            other => ServeError::Review(other),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub annotations: PathBuf,
    pub granule_root: PathBuf,
    pub ais: Option<PathBuf>,
    pub matching: MatchConfig,
    pub mode: MatchMode,
    /// Directory of a built UI bundle, served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(annotations: impl Into<PathBuf>, granule_root: impl Into<PathBuf>) -> Self {
        Self {
            annotations: annotations.into(),
            granule_root: granule_root.into(),
            ais: None,
            matching: MatchConfig::default(),
            mode: MatchMode::Dense,
            static_dir: None,
        }
    }

    /// Apply the store override (normally the value of [`STORE_ENV`]).
    pub fn with_store_override(mut self, value: Option<String>) -> Self {
        if let Some(v) = value.filter(|v| !v.is_empty()) {
            self.annotations = PathBuf::from(v);
        }
        self
    }
}

struct Inner {
    cfg: ServeConfig,
    store: Mutex<Store>,
    snapshot: RwLock<Arc<AiscocoDoc>>,
    ais: Vec<AisRecord>,
    footprints: BTreeMap<String, Footprint>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Open the store (taking its lock), load AIS and granule footprints.
    pub fn open(cfg: ServeConfig) -> Result<Self, ServeError> {
        let ais = match &cfg.ais {
            Some(p) => read_ais_csv(p)?.records,
            None => Vec::new(),
        };
        let original = crate::aiscoco::read_aiscoco(&cfg.annotations).map_err(ReviewError::from)?;
        let mut footprints = BTreeMap::new();
        let mut records = CandidateRecords::new();
        for img in &original.images {
            let dir = cfg.granule_root.join(&img.file_name);
            let Ok(meta) = MetaFile::read(&dir) else {
                continue;
            };
            let fp = Footprint::new(meta.sensing_time, meta.geotransform, img.width as usize, img.height as usize);
            records.insert(img.file_name.clone(), filter_records(&ais, &fp, &cfg.matching, cfg.mode));
            footprints.insert(img.file_name.clone(), fp);
        }
        let store = Store::open(&cfg.annotations, records)?;
        let snapshot = RwLock::new(Arc::new(store.doc().clone()));
        Ok(Self(Arc::new(Inner {
            cfg,
            store: Mutex::new(store),
            snapshot,
            ais,
            footprints,
        })))
    }

    pub fn snapshot(&self) -> Arc<AiscocoDoc> {
        self.0.snapshot.read().expect("snapshot lock").clone()
    }
}

fn error(status: StatusCode, kind: &str, message: impl ToString) -> Response {
    (status, Json(json!({"error": kind, "message": message.to_string()}))).into_response()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['/', '\\']) && id != "." && id != ".."
}

#[derive(Serialize)]
struct GranuleSummary {
    id: String,
    bands: Vec<String>,
    sensing_time: chrono::DateTime<chrono::Utc>,
    width: Option<u32>,
    height: Option<u32>,
    annotations: usize,
}

fn list_granules(root: &Path, doc: &AiscocoDoc) -> Vec<GranuleSummary> {
    let Ok(rd) = std::fs::read_dir(root) else {
        return Vec::new();
    };
    let mut dirs: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join("meta.json").is_file()).collect();
    dirs.sort();
    dirs.iter()
        .filter_map(|d| MetaFile::read(d).ok())
        .map(|m| {
            let img = doc.image_by_name(&m.id);
            GranuleSummary {
                annotations: img.map_or(0, |i| doc.annotations_for(i.id).count()),
                width: img.map(|i| i.width),
                height: img.map(|i| i.height),
                id: m.id,
                bands: m.bands,
                sensing_time: m.sensing_time,
            }
        })
        .collect()
}

async fn granules(State(s): State<AppState>) -> Response {
    let doc = s.snapshot();
    let root = s.0.cfg.granule_root.clone();
    match tokio::task::spawn_blocking(move || list_granules(&root, &doc)).await {
        Ok(list) => Json(list).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    }
}

async fn granule(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    if !valid_id(&id) {
        return error(StatusCode::NOT_FOUND, "unknown_granule", &id);
    }
    let dir = s.0.cfg.granule_root.join(&id);
    let loaded = tokio::task::spawn_blocking(move || load_granule(dir)).await;
    match loaded {
        Ok(Ok(g)) => {
            let doc = s.snapshot();
            let image_id = doc.image_by_name(&id).map(|i| i.id);
            Json(json!({
                "id": g.id,
                "bands": g.band_ids(),
                "width": g.width(),
                "height": g.height(),
                "sensing_time": g.meta.sensing_time,
                "resolution_m": g.meta.resolution_m,
                "bit_depth": g.meta.bit_depth,
                "sensor": g.meta.sensor,
                "geotransform": g.meta.geotransform,
                "image_id": image_id,
            }))
            .into_response()
        }
        Ok(Err(e)) => error(StatusCode::NOT_FOUND, "unknown_granule", e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    }
}

#[derive(Deserialize)]
struct Stretch {
    lo: Option<f64>,
    hi: Option<f64>,
}

async fn band_png(
    State(s): State<AppState>,
    UrlPath((id, file)): UrlPath<(String, String)>,
    Query(q): Query<Stretch>,
) -> Response {
    let Some(band) = file.strip_suffix(".png").map(str::to_string) else {
        return error(StatusCode::NOT_FOUND, "unknown_band", &file);
    };
    if !valid_id(&id) || !valid_id(&band) {
        return error(StatusCode::NOT_FOUND, "unknown_band", &file);
    }
    let dir = s.0.cfg.granule_root.join(&id);
    let (lo, hi) = (q.lo.unwrap_or(2.0), q.hi.unwrap_or(98.0));
    let res = tokio::task::spawn_blocking(move || {
        let meta = MetaFile::read(&dir).map_err(|e| (StatusCode::NOT_FOUND, "unknown_granule", e.to_string()))?;
        if !meta.bands.contains(&band) {
            return Err((StatusCode::NOT_FOUND, "unknown_band", band));
        }
        let img = read_band_tiff(&dir.join(format!("{band}.tif")), &band)
            .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, "raster", e.to_string()))?;
        stretch_to_png(&img, lo, hi).map_err(|e| (StatusCode::BAD_REQUEST, "invalid_stretch", e.to_string()))
    })
    .await;
    match res {
        Ok(Ok(bytes)) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Ok(Err((code, kind, msg))) => error(code, kind, msg),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    }
}

async fn annotations(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let doc = s.snapshot();
    let Some(img) = doc.image_by_name(&id) else {
        return error(StatusCode::NOT_FOUND, "unknown_granule", &id);
    };
    let mut anns: Vec<_> = doc.annotations_for(img.id).collect();
    anns.sort_by_key(|a| a.id);
    let items: Vec<Value> = anns
        .iter()
        .map(|a| {
            let mut v = serde_json::to_value(a).expect("annotation serializes");
            v["status"] = display_status(a).into();
            v["revision"] = review_state(a).map_or(0, |r| r.revision).into();
            v
        })
        .collect();
    Json(json!({"granule": id, "image_id": img.id, "annotations": items})).into_response()
}

async fn candidates(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let doc = s.snapshot();
    let Some(img) = doc.image_by_name(&id) else {
        return error(StatusCode::NOT_FOUND, "unknown_granule", &id);
    };
    let Some(fp) = s.0.footprints.get(&id) else {
        return error(StatusCode::NOT_FOUND, "unknown_granule", format!("no meta.json for {id}"));
    };
    let mut boxes: Vec<_> = doc.annotations_for(img.id).map(|a| (a.id, a.bbox())).collect();
    boxes.sort_by_key(|b| b.0);
    let gb = GranuleBoxes {
        granule: id.clone(),
        footprint: fp.clone(),
        boxes,
    };
    let cfg = &s.0.cfg;
    match candidates_for_granule(&gb, &s.0.ais, &cfg.matching, cfg.mode) {
        Ok(c) => Json(json!({"granule": id, "boxes": c})).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "ais", e),
    }
}

async fn decide(State(s): State<AppState>, Json(d): Json<ReviewDecision>) -> Response {
    let inner = s.0.clone();
    let res = tokio::task::spawn_blocking(move || {
        let mut store = inner.store.lock().expect("store lock");
        let r = store.decide(&d);
        if r.is_ok() {
            *inner.snapshot.write().expect("snapshot lock") = Arc::new(store.doc().clone());
        }
        let ann = store.doc().annotations.iter().find(|a| a.id == d.box_id).cloned();
        (r, ann, store.seq())
    })
    .await;
    let (r, ann, seq) = match res {
        Ok(x) => x,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    };
    match r {
        Ok(()) => {
            let a = ann.expect("decided annotation exists");
            Json(json!({
                "box_id": a.id,
                "status": display_status(&a),
                "revision": review_state(&a).map_or(0, |x| x.revision),
                "log_seq": seq,
                "annotation": a,
            }))
            .into_response()
        }
        Err(e @ ReviewError::Conflict { current, .. }) => (
            StatusCode::CONFLICT,
            Json(json!({"error": "conflict", "message": e.to_string(), "current_revision": current})),
        )
            .into_response(),
        Err(e @ (ReviewError::UnknownGranule(_) | ReviewError::UnknownBox { .. })) => {
            error(StatusCode::NOT_FOUND, "not_found", e)
        }
        Err(e @ (ReviewError::NotACandidate(_) | ReviewError::MmsiTaken { .. } | ReviewError::EmptyReviewer)) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_decision", e)
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "store", e),
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/granules", get(granules))
        .route("/api/granules/:id", get(granule))
        .route("/api/granules/:id/band/:file", get(band_png))
        .route("/api/granules/:id/annotations", get(annotations))
        .route("/api/granules/:id/candidates", get(candidates))
        .route("/api/decisions", post(decide));
    let app = match &state.0.cfg.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state)
}

/// Bind, then serve until Ctrl-C.
pub async fn serve(cfg: ServeConfig, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = bind(addr).await?;
    let state = AppState::open(cfg)?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse(addr.port())
        } else {
            ServeError::Io(e)
        }
    })
}
