use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use pdfsift_core::analytics::AnalyticsError;
use pdfsift_core::learner::LearnerError;
use serde::Serialize;

/// Every `code` the API can return.
pub const ERROR_CODES: [&str; 10] = [
    "bad_request",
    "invalid_parameter",
    "unknown_document",
    "unknown_session",
    "unknown_page",
    "not_found",
    "need_both_classes",
    "no_model",
    "too_large",
    "internal",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    pub http_status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { code, message: message.into(), http_status: status.as_u16() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn invalid_parameter(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_parameter", message)
    }

    pub fn unknown_document(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_document", format!("no document with id {id:?}"))
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session with id {id:?}"))
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn too_large(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "too_large", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

impl From<LearnerError> for ApiError {
    fn from(e: LearnerError) -> Self {
        let message = e.to_string();
        match e {
            LearnerError::NeedBothClasses => Self::new(StatusCode::CONFLICT, "need_both_classes", message),
            LearnerError::NoModel => Self::new(StatusCode::CONFLICT, "no_model", message),
            LearnerError::UnknownPage(_) => Self::new(StatusCode::NOT_FOUND, "unknown_page", message),
            LearnerError::DimMismatch { .. } | LearnerError::ZeroChunk => Self::internal(message),
        }
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::InvalidK | AnalyticsError::KTooLarge { .. } | AnalyticsError::DegenerateInput { .. } => {
                Self::invalid_parameter(e.to_string())
            }
            AnalyticsError::EmptyGroup => Self::not_found("no documents match the filter"),
            AnalyticsError::DimMismatch(..) | AnalyticsError::NonFinite => Self::internal(e.to_string()),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::invalid_parameter(e.body_text())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        Self::internal(format!("worker task failed: {e}"))
    }
}
