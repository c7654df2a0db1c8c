use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Every error response carries exactly one of these codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Body is not valid JSON, or the pattern violates its invariants.
    InvalidPattern,
    /// Well-formed JSON with a bad or unknown option.
    InvalidRequest,
    /// A segment rectangle leaves the grid.
    OutOfBounds,
    /// Requested resolution exceeds the service limit.
    ResolutionLimit,
    /// The heuristic pushed material across the grid border.
    Overflow,
    /// Relaxation hit its sweep cap.
    NonConvergence,
    /// Surrogate requested but no weights are loaded.
    ModelUnavailable,
    /// Surrogate weights were trained at another resolution.
    ResolutionMismatch,
    /// The requested representation cannot be produced.
    NotAcceptable,
    NotFound,
    MethodNotAllowed,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::InvalidPattern
            | ErrorCode::InvalidRequest
            | ErrorCode::OutOfBounds
            | ErrorCode::ResolutionLimit
            | ErrorCode::ResolutionMismatch => StatusCode::BAD_REQUEST,
            ErrorCode::Overflow => StatusCode::CONFLICT,
            ErrorCode::NonConvergence => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::ModelUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::NotAcceptable => StatusCode::NOT_ACCEPTABLE,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a ApiError,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(ErrorBody { error: &self })).into_response()
    }
}
