//! Request parsing and response bodies.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use timflow_core::{Boundary, DispensePattern, GridSpec, Schedule, TimGrid};

use crate::error::{ApiError, ErrorCode};

/// Largest accepted grid side.
pub const MAX_SIDE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heuristic,
    Surrogate,
}

/// `[H, W]` or `"HxW"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Resolution {
    Pair([u64; 2]),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Options {
    #[serde(default)]
    model: Option<ModelKind>,
    #[serde(default)]
    gap: Option<f64>,
    #[serde(default)]
    resolution: Option<Resolution>,
    #[serde(default)]
    schedule: Option<String>,
    #[serde(default)]
    boundary: Option<String>,
    #[serde(default)]
    timing: bool,
}

/// A validated request shared by both POST endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRequest {
    pub pattern: DispensePattern,
    pub model: Option<ModelKind>,
    pub gap: f64,
    pub resolution: GridSpec,
    pub schedule: Option<Schedule>,
    pub boundary: Option<Boundary>,
    pub timing: bool,
}

fn invalid_request(message: impl Into<String>) -> ApiError {
    ApiError::new(ErrorCode::InvalidRequest, message)
}

fn resolution_of(r: Resolution) -> Result<GridSpec, ApiError> {
    let (h, w) = match r {
        Resolution::Pair([h, w]) => (h, w),
        Resolution::Text(s) => {
            let spec: GridSpec = s
                .parse()
                .map_err(|e: timflow_core::grid::GridError| invalid_request(e.to_string()))?;
            (spec.height as u64, spec.width as u64)
        }
    };
    if h == 0 || w == 0 {
        return Err(invalid_request(format!("resolution {h}x{w} has an empty side")));
    }
    if h > MAX_SIDE as u64 || w > MAX_SIDE as u64 {
        return Err(ApiError::new(
            ErrorCode::ResolutionLimit,
            format!("resolution {h}x{w} exceeds the limit of {MAX_SIDE}x{MAX_SIDE}"),
        ));
    }
    Ok(GridSpec::new(h as usize, w as usize).expect("sides checked"))
}

/// Parses a request body. Syntax errors and pattern problems map to
/// `invalid_pattern`; everything else to `invalid_request` (or
/// `resolution_limit`).
pub fn parse_request(body: &[u8]) -> Result<SimRequest, ApiError> {
    let value: Value = serde_json::from_slice(body)
        .map_err(|e| ApiError::new(ErrorCode::InvalidPattern, format!("malformed JSON: {e}")))?;
    let Value::Object(mut fields) = value else {
        return Err(ApiError::new(
            ErrorCode::InvalidPattern,
            "request body must be a JSON object",
        ));
    };
    let pattern = fields
        .remove("pattern")
        .ok_or_else(|| ApiError::new(ErrorCode::InvalidPattern, "missing field `pattern`"))?;
    let pattern: DispensePattern = serde_json::from_value(pattern)
        .map_err(|e| ApiError::new(ErrorCode::InvalidPattern, e.to_string()))?;
    let options: Options = serde_json::from_value(Value::Object(fields))
        .map_err(|e| invalid_request(e.to_string()))?;

    let gap = options.gap.unwrap_or(1.0);
    if !(gap.is_finite() && gap > 0.0) {
        return Err(invalid_request(format!("gap must be positive, got {gap}")));
    }
    let resolution = match options.resolution {
        Some(r) => resolution_of(r)?,
        None => GridSpec::default(),
    };
    let schedule = options
        .schedule
        .map(|s| s.parse::<Schedule>())
        .transpose()
        .map_err(|e| invalid_request(e.to_string()))?;
    let boundary = options
        .boundary
        .map(|s| s.parse::<Boundary>())
        .transpose()
        .map_err(|e| invalid_request(e.to_string()))?;
    if options.model == Some(ModelKind::Surrogate) && (schedule.is_some() || boundary.is_some()) {
        return Err(invalid_request(
            "schedule and boundary apply to the heuristic model only",
        ));
    }
    Ok(SimRequest {
        pattern,
        model: options.model,
        gap,
        resolution,
        schedule,
        boundary,
        timing: options.timing,
    })
}

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Grid as nested rows with values rounded to 6 significant digits.
pub fn wire_grid(grid: &TimGrid) -> Vec<Vec<f64>> {
    grid.rows()
        .map(|row| row.iter().map(|&a| round6(a)).collect())
        .collect()
}

#[derive(Debug, Serialize)]
pub struct DiscretizeResponse {
    pub resolution: [usize; 2],
    pub total_mass: f64,
    pub dispensed: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct CompressResponse {
    pub model: ModelKind,
    pub resolution: [usize; 2],
    pub gap: f64,
    pub dispensed: Vec<Vec<f64>>,
    pub compressed: Vec<Vec<f64>>,
    pub coverage_ratio: f64,
    pub void_count: usize,
    pub off_grid_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compute_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct HealthResponse {
    pub status: &'static str,
    pub model_loaded: bool,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_resolution: Option<[usize; 2]>,
}
