use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    InvalidConfig,
    WrongPhase,
    UnknownSession,
    NotTerminated,
    DuplicateSurvey,
    RangeViolation,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::InvalidConfig | ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::WrongPhase | ErrorCode::NotTerminated | ErrorCode::DuplicateSurvey => StatusCode::CONFLICT,
            ErrorCode::UnknownSession => StatusCode::NOT_FOUND,
            ErrorCode::RangeViolation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[error("{code:?}: {message}")]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn unknown(id: &str) -> Self {
        Self::new(ErrorCode::UnknownSession, format!("no session {id}"))
    }
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ApiError,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(ErrorBody { error: self })).into_response()
    }
}
