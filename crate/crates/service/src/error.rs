use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use dg_core::GameError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown condition `{0}` (expected no-cost, constant or increasing)")]
    UnknownCondition(String),
    #[error("no session with id `{0}`")]
    NotFound(String),
    #[error("session is still in progress")]
    SessionOpen,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) | ApiError::UnknownCondition(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::SessionOpen => StatusCode::CONFLICT,
            ApiError::Game(GameError::UnknownServer { .. } | GameError::Config(_) | GameError::UnknownScheme(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::Game(_) => StatusCode::CONFLICT,
            ApiError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::UnknownCondition(_) => "unknown_condition",
            ApiError::NotFound(_) => "not_found",
            ApiError::SessionOpen => "session_open",
            ApiError::Game(e) => match e {
                GameError::UnknownServer { .. } => "unknown_server",
                GameError::BudgetExhausted { .. } => "budget_exhausted",
                GameError::RoundClosed { .. } => "stage_order",
                GameError::SessionFinished => "session_finished",
                GameError::Config(_) => "bad_request",
                GameError::UnknownScheme(_) => "unknown_condition",
            },
            ApiError::Storage(_) => "storage",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
