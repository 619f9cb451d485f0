//! Local JSON-over-HTTP service under `/v1/`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use panostage_core::io::{load_panorama, tonemap_png};
use panostage_core::layout::{plan_json, CornerPolicy, LayoutType, PlacementPlan};
use panostage_core::projection::PerspectiveView;
use panostage_core::scene::{preview_render, Material, PreviewSpec};
use panostage_core::{Error, ErrorKind};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{
    build_scene, default_camera, load_emitters, load_layout, load_library, load_materials, plan_sequence, PolicyArg,
    StageInputs, DEFAULT_CAMERA_HEIGHT_M, DEFAULT_SPP,
};

pub const WORKSPACE_FILE: &str = "workspace.json";
pub const DEFAULT_TIMEOUT_S: f64 = 30.0;

/// Optional `workspace.json`; paths are relative to the workspace directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceFile {
    #[serde(default = "default_layout")]
    pub layout: PathBuf,
    #[serde(default = "default_environment")]
    pub environment: PathBuf,
    #[serde(default)]
    pub mask: Option<PathBuf>,
    #[serde(default)]
    pub components: Option<PathBuf>,
    #[serde(default)]
    pub materials: Option<PathBuf>,
    #[serde(default)]
    pub emitters: Option<PathBuf>,
    #[serde(default)]
    pub orientation_deg: f64,
    #[serde(default = "default_camera_height")]
    pub camera_height_m: f64,
    /// Panorama id → file. Default: every .exr/.hdr in the workspace, keyed by stem.
    #[serde(default)]
    pub panoramas: Option<BTreeMap<String, PathBuf>>,
}

fn default_layout() -> PathBuf {
    "layout.json".into()
}

fn default_environment() -> PathBuf {
    "environment.exr".into()
}

fn default_camera_height() -> f64 {
    DEFAULT_CAMERA_HEIGHT_M
}

impl Default for WorkspaceFile {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug)]
pub struct Workspace {
    pub inputs: StageInputs,
    pub camera_height_m: f64,
    pub panoramas: BTreeMap<String, PathBuf>,
    layout_file: Value,
}

impl Workspace {
    pub fn load(dir: &Path) -> panostage_core::Result<Self> {
        let ws_path = dir.join(WORKSPACE_FILE);
        let file: WorkspaceFile = if ws_path.exists() {
            let text = fs::read_to_string(&ws_path).map_err(|e| Error::io(&ws_path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::format(&ws_path, e))?
        } else {
            WorkspaceFile::default()
        };
        let rel = |p: &Path| dir.join(p);
        let layout = load_layout(&rel(&file.layout), file.mask.as_deref().map(rel).as_deref())?;
        let panoramas = match &file.panoramas {
            Some(m) => m.iter().map(|(k, v)| (k.clone(), rel(v))).collect(),
            None => scan_panoramas(dir)?,
        };
        Ok(Self {
            layout_file: serde_json::to_value(layout.to_file()).expect("layout serializes"),
            inputs: StageInputs {
                env: load_panorama(&rel(&file.environment))?,
                library: load_library(file.components.as_deref().map(rel).as_deref())?,
                orientation_deg: file.orientation_deg,
                materials: load_materials(file.materials.as_deref().map(rel).as_deref())?,
                emitters: load_emitters(file.emitters.as_deref().map(rel).as_deref())?,
                layout,
            },
            camera_height_m: file.camera_height_m,
            panoramas,
        })
    }
}

fn scan_panoramas(dir: &Path) -> panostage_core::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("exr" | "hdr")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Job {
    Running,
    Done(Vec<u8>),
    Failed(ApiError),
}

#[derive(Debug, Default)]
struct Session {
    plan: Option<PlacementPlan>,
    materials: BTreeMap<String, Material>,
}

pub struct AppState {
    workspace: Workspace,
    session: Mutex<Session>,
    jobs: Mutex<HashMap<u64, Job>>,
    next_job: AtomicU64,
    timeout: Duration,
}

impl AppState {
    pub fn new(workspace: Workspace, timeout: Duration) -> Self {
        let materials = workspace.inputs.materials.clone();
        Self {
            workspace,
            session: Mutex::new(Session { plan: None, materials }),
            jobs: Mutex::new(HashMap::new()),
            next_job: AtomicU64::new(1),
            timeout,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            kind: "not_found",
            message,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match e.kind() {
            ErrorKind::Validation => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ErrorKind::Numeric => (StatusCode::UNPROCESSABLE_ENTITY, "numeric"),
            ErrorKind::Io => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        Self {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

/// Parses a JSON body, reporting malformed input as a validation error.
fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| Error::invalid(format!("bad request body: {e}")).into())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/scene", get(get_scene))
        .route("/v1/pano/:id", get(get_pano))
        .route("/v1/plan", post(post_plan))
        .route("/v1/preview", post(post_preview))
        .route("/v1/material", post(post_material))
        .route("/v1/job/:id", get(get_job))
        .fallback(|| async { ApiError::not_found("no such endpoint".into()) })
        .with_state(state)
}

async fn get_scene(State(st): State<Arc<AppState>>) -> Response {
    let session = st.session.lock().expect("session lock");
    let ws = &st.workspace;
    let plan: Value = session
        .plan
        .as_ref()
        .map_or(Value::Null, |p| serde_json::from_str(&plan_json(p)).expect("plan is JSON"));
    Json(json!({
        "layout": ws.layout_file,
        "orientation_deg": ws.inputs.orientation_deg,
        "components": ws.inputs.library.ids().collect::<Vec<_>>(),
        "panoramas": ws.panoramas.keys().collect::<Vec<_>>(),
        "materials": session.materials,
        "plan": plan,
    }))
    .into_response()
}

async fn get_pano(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let path = st
        .workspace
        .panoramas
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown panorama id {id:?}")))?;
    let bytes = tokio::task::spawn_blocking(move || {
        let pano = load_panorama(&path)?;
        tonemap_png(pano.image())
    })
    .await
    .expect("pano task")?;
    Ok(png(bytes))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    sequence: Vec<String>,
    #[serde(default)]
    policy: PolicyArg,
}

async fn post_plan(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: PlanRequest = parse_body(&body)?;
    let inputs = &st.workspace.inputs;
    let plan = plan_sequence(&inputs.layout, &inputs.library, &req.sequence, req.policy.into())?;
    let text = plan_json(&plan);
    st.session.lock().expect("session lock").plan = Some(plan);
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Albedo {
    Grey(f64),
    Rgb([f64; 3]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialRequest {
    slot: String,
    albedo: Albedo,
    #[serde(default)]
    specular: Option<f64>,
}

async fn post_material(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: MaterialRequest = parse_body(&body)?;
    if req.slot.is_empty() {
        return Err(Error::invalid("material slot must not be empty").into());
    }
    let albedo = match req.albedo {
        Albedo::Grey(a) => [a; 3],
        Albedo::Rgb(a) => a,
    };
    let material = Material {
        albedo,
        texture: None,
        specular: req.specular,
    };
    material.validate()?;
    let mut session = st.session.lock().expect("session lock");
    session.materials.insert(req.slot, material);
    Ok(Json(json!({ "materials": session.materials })).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    view: PerspectiveView,
    #[serde(default)]
    spp: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    position: Option<[f64; 3]>,
}

fn empty_plan() -> PlacementPlan {
    PlacementPlan {
        layout_type: LayoutType::I,
        policy: CornerPolicy::ScaleLast,
        walls: Vec::new(),
        entries: Vec::new(),
    }
}

async fn post_preview(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: PreviewRequest = parse_body(&body)?;
    let ws = &st.workspace;
    let mut inputs = ws.inputs.clone();
    let plan = {
        let session = st.session.lock().expect("session lock");
        inputs.materials = session.materials.clone();
        session.plan.clone().unwrap_or_else(empty_plan)
    };
    let spec = PreviewSpec {
        view: req.view,
        position: req
            .position
            .unwrap_or_else(|| default_camera(&inputs.layout, ws.camera_height_m)),
        spp: req.spp.unwrap_or(DEFAULT_SPP),
        seed: req.seed.unwrap_or(0),
    };
    let mut handle = tokio::task::spawn_blocking(move || -> panostage_core::Result<Vec<u8>> {
        let scene = build_scene(&inputs, &plan)?;
        tonemap_png(&preview_render(&scene, &spec)?)
    });
    // a zero timeout turns every preview into a job
    let finished = if st.timeout.is_zero() {
        None
    } else {
        tokio::time::timeout(st.timeout, &mut handle).await.ok()
    };
    match finished {
        Some(done) => Ok(png(done.expect("preview task")?)),
        None => {
            let id = st.next_job.fetch_add(1, Ordering::Relaxed);
            st.jobs.lock().expect("jobs lock").insert(id, Job::Running);
            let st2 = st.clone();
            tokio::spawn(async move {
                let job = match handle.await.expect("preview task") {
                    Ok(bytes) => Job::Done(bytes),
                    Err(e) => Job::Failed(e.into()),
                };
                st2.jobs.lock().expect("jobs lock").insert(id, job);
            });
            Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id, "status": "running" }))).into_response())
        }
    }
}

async fn get_job(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let job = id
        .parse::<u64>()
        .ok()
        .and_then(|n| st.jobs.lock().expect("jobs lock").get(&n).cloned())
        .ok_or_else(|| ApiError::not_found(format!("unknown job id {id:?}")))?;
    match job {
        Job::Running => Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id, "status": "running" }))).into_response()),
        Job::Done(bytes) => Ok(png(bytes)),
        Job::Failed(e) => Err(e),
    }
}

pub async fn serve(workspace: Workspace, port: u16, timeout: Duration) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(workspace, timeout));
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}/v1/", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
