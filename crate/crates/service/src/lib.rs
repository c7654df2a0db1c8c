//! Stateless HTTP/JSON facade over the `timflow-core` pipeline.
//!
//! Endpoints:
//!
//! * `POST /api/v1/discretize`: rasterize a pattern.
//! * `POST /api/v1/compress`: rasterize and compress with the heuristic or
//!   the surrogate network.
//! * `GET /api/v1/health`: liveness and model state.
//!
//! Errors are JSON bodies `{"error": {"code": ..., "message": ...}}` with a
//! code from [`ErrorCode`]. Sending `Accept: application/x-timd` to either
//! POST endpoint returns a one-record TIMD file instead of JSON.

pub mod api;
pub mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use timflow_core::dataset::{write_dataset, Dataset, Record};
use timflow_core::heuristic::CompressError;
use timflow_core::metrics::{coverage_ratio, detect_voids, CellMask, DEFAULT_COVER_THRESHOLD};
use timflow_core::raster::{scale_for_gap, RasterError};
use timflow_core::surrogate::{load_weights, predict_from_grid, SurrogateModel};
use timflow_core::{compress, discretize, CompressionConfig, TimGrid};

pub use api::{parse_request, ModelKind, SimRequest, MAX_SIDE};
pub use error::{ApiError, ErrorCode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TIMD_MEDIA_TYPE: &str = "application/x-timd";
pub const DEFAULT_PORT: u16 = 8080;

/// Immutable state shared by all handlers.
#[derive(Clone, Default)]
pub struct AppState {
    model: Option<Arc<SurrogateModel>>,
}

impl AppState {
    pub fn new(model: Option<SurrogateModel>) -> Self {
        Self {
            model: model.map(Arc::new),
        }
    }

    pub fn model(&self) -> Option<&SurrogateModel> {
        self.model.as_deref()
    }
}

/// Port and weights path, from flags or the `TIMFLOW_PORT` /
/// `TIMFLOW_WEIGHTS` environment variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub port: u16,
    pub weights: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            weights: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, String> {
        Self::from_vars(|k| std::env::var(k).ok())
    }

    pub fn from_vars(var: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let port = match var("TIMFLOW_PORT") {
            Some(p) => p
                .parse()
                .map_err(|_| format!("TIMFLOW_PORT is not a port number: {p:?}"))?,
            None => DEFAULT_PORT,
        };
        let weights = var("TIMFLOW_WEIGHTS")
            .filter(|w| !w.is_empty())
            .map(PathBuf::from);
        Ok(Self { port, weights })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/discretize", post(discretize_handler))
        .route("/api/v1/compress", post(compress_handler))
        .route("/api/v1/health", get(health_handler))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(ErrorCode::MethodNotAllowed, "method not allowed for this endpoint")
        })
        .with_state(state)
}

/// Loads weights (if configured) and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error>> {
    let model = match &config.weights {
        Some(path) => Some(load_weights(path).map_err(|e| format!("{}: {e}", path.display()))?),
        None => None,
    };
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, model_loaded = model.is_some(), "listening");
    axum::serve(listener, router(AppState::new(model)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn health_handler(State(state): State<AppState>) -> Json<api::HealthResponse> {
    Json(api::HealthResponse {
        status: "ok",
        model_loaded: state.model.is_some(),
        version: VERSION,
        model_resolution: state.model().map(|m| [m.spec().height, m.spec().width]),
    })
}

/// `Ok(true)` for TIMD, `Ok(false)` for JSON. A missing `Accept` header
/// means JSON.
fn wants_timd(headers: &HeaderMap) -> Result<bool, ApiError> {
    let types: Vec<String> = headers
        .get_all(header::ACCEPT)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .map(|t| t.split(';').next().unwrap_or("").trim().to_ascii_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if types.iter().any(|t| t == TIMD_MEDIA_TYPE) {
        return Ok(true);
    }
    if types.is_empty()
        || types
            .iter()
            .any(|t| matches!(t.as_str(), "application/json" | "application/*" | "*/*"))
    {
        return Ok(false);
    }
    Err(ApiError::new(
        ErrorCode::NotAcceptable,
        format!("can only produce application/json or {TIMD_MEDIA_TYPE}"),
    ))
}

fn raster_error(e: RasterError) -> ApiError {
    match e {
        RasterError::OutOfBounds { .. } => ApiError::new(ErrorCode::OutOfBounds, e.to_string()),
        RasterError::InvalidPattern(_) => ApiError::new(ErrorCode::InvalidPattern, e.to_string()),
        RasterError::NonPositiveGap(_) => ApiError::new(ErrorCode::InvalidRequest, e.to_string()),
    }
}

fn compress_error(e: CompressError) -> ApiError {
    let code = match e {
        CompressError::MassOverflow { .. } => ErrorCode::Overflow,
        CompressError::NonConvergence { .. } => ErrorCode::NonConvergence,
        CompressError::NonFiniteInput | CompressError::InvalidConfig(_) => ErrorCode::InvalidRequest,
    };
    ApiError::new(code, e.to_string())
}

fn timd_response(
    req: &SimRequest,
    dispensed: TimGrid,
    compressed: TimGrid,
) -> Result<Response, ApiError> {
    let dataset = Dataset {
        spec: req.resolution,
        records: vec![Record {
            pattern: req.pattern.clone(),
            dispensed,
            compressed,
        }],
    };
    let mut body = Vec::new();
    write_dataset(&mut body, &dataset).map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, TIMD_MEDIA_TYPE)], body).into_response())
}

fn with_timing(mut response: Response, started: Instant) -> Response {
    let ms = started.elapsed().as_secs_f64() * 1e3;
    if let Ok(v) = HeaderValue::from_str(&format!("compute;dur={ms:.3}")) {
        response.headers_mut().insert("server-timing", v);
    }
    response
}

async fn discretize_handler(headers: HeaderMap, body: Bytes) -> Response {
    let started = Instant::now();
    let result = (|| {
        let timd = wants_timd(&headers)?;
        let req = parse_request(&body)?;
        let grid = discretize(&req.pattern, req.resolution).map_err(raster_error)?;
        if timd {
            return timd_response(&req, grid.clone(), grid);
        }
        Ok(Json(api::DiscretizeResponse {
            resolution: [grid.height(), grid.width()],
            total_mass: api::round6(grid.total()),
            dispensed: api::wire_grid(&grid),
        })
        .into_response())
    })();
    with_timing(result.unwrap_or_else(IntoResponse::into_response), started)
}

struct Outcome {
    dispensed: TimGrid,
    compressed: TimGrid,
    off_grid_mass: f64,
    iterations: Option<u64>,
}

fn run_compress(state: &AppState, req: &SimRequest) -> Result<Outcome, ApiError> {
    let model = req.model.ok_or_else(|| {
        ApiError::new(
            ErrorCode::InvalidRequest,
            "missing field `model` (\"heuristic\" or \"surrogate\")",
        )
    })?;
    let surrogate = match model {
        ModelKind::Surrogate => {
            let m = state.model().ok_or_else(|| {
                ApiError::new(ErrorCode::ModelUnavailable, "no surrogate weights are loaded")
            })?;
            if m.spec() != req.resolution {
                return Err(ApiError::new(
                    ErrorCode::ResolutionMismatch,
                    format!(
                        "the surrogate was trained at {} but {} was requested",
                        m.spec(),
                        req.resolution
                    ),
                ));
            }
            Some(m)
        }
        ModelKind::Heuristic => None,
    };
    let dispensed = discretize(&req.pattern, req.resolution).map_err(raster_error)?;
    match surrogate {
        Some(m) => {
            let compressed = predict_from_grid(m, &dispensed, req.gap)
                .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
            Ok(Outcome {
                dispensed,
                compressed,
                off_grid_mass: 0.0,
                iterations: None,
            })
        }
        None => {
            let mut config = CompressionConfig::default();
            if let Some(s) = req.schedule {
                config.schedule = s;
            }
            if let Some(b) = req.boundary {
                config.boundary = b;
            }
            let scaled = scale_for_gap(&dispensed, req.gap).map_err(raster_error)?;
            let result = compress(&scaled, &config).map_err(compress_error)?;
            let (compressed, off_grid_mass) = if req.gap == 1.0 {
                (result.compressed, result.off_grid_mass)
            } else {
                (result.compressed.scaled(req.gap), result.off_grid_mass * req.gap)
            };
            Ok(Outcome {
                dispensed,
                compressed,
                off_grid_mass,
                iterations: Some(result.iterations),
            })
        }
    }
}

async fn compress_handler(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let started = Instant::now();
    let (req, timd) = match wants_timd(&headers).and_then(|t| Ok((parse_request(&body)?, t))) {
        Ok(r) => r,
        Err(e) => return with_timing(e.into_response(), started),
    };
    let outcome = tokio::task::spawn_blocking({
        let req = req.clone();
        move || run_compress(&state, &req)
    })
    .await
    .unwrap_or_else(|e| Err(ApiError::new(ErrorCode::Internal, e.to_string())));
    let response = match outcome {
        Err(e) => e.into_response(),
        Ok(out) if timd => {
            timd_response(&req, out.dispensed, out.compressed).unwrap_or_else(IntoResponse::into_response)
        }
        Ok(out) => {
            let threshold = DEFAULT_COVER_THRESHOLD * req.gap;
            let coverage = coverage_ratio(&out.compressed, &CellMask::full(req.resolution), threshold)
                .expect("full mask of matching resolution");
            let voids = detect_voids(&out.compressed, threshold).len();
            Json(api::CompressResponse {
                model: req.model.expect("checked by run_compress"),
                resolution: [req.resolution.height, req.resolution.width],
                gap: req.gap,
                dispensed: api::wire_grid(&out.dispensed),
                compressed: api::wire_grid(&out.compressed),
                coverage_ratio: api::round6(coverage),
                void_count: voids,
                off_grid_mass: api::round6(out.off_grid_mass),
                iterations: out.iterations,
                compute_ms: req.timing.then(|| started.elapsed().as_secs_f64() * 1e3),
            })
            .into_response()
        }
    };
    with_timing(response, started)
}
