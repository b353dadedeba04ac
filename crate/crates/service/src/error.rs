use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use interlangue_core::{ExplorerError, SampleError};

/// The JSON body of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn no_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session {id}"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<ExplorerError> for ApiError {
    fn from(e: ExplorerError) -> Self {
        let (status, code) = match &e {
            ExplorerError::UnknownWord(_) => (StatusCode::NOT_FOUND, "unknown_word"),
            ExplorerError::EmptyPair(_) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_pair"),
            ExplorerError::NotActive(_) => (StatusCode::CONFLICT, "not_active"),
            ExplorerError::Space(interlangue_core::SpaceError::InvalidConfig(_)) => {
                (StatusCode::BAD_REQUEST, "invalid_config")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<SampleError> for ApiError {
    fn from(e: SampleError) -> Self {
        let (status, code) = match &e {
            SampleError::NoExamples => (StatusCode::NOT_FOUND, "no_examples"),
            SampleError::EdgeNotActive { .. } => (StatusCode::CONFLICT, "edge_not_active"),
            SampleError::InvalidCount => (StatusCode::BAD_REQUEST, "bad_request"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
