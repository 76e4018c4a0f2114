use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};
use stable_rank::exact2d::Infeasibility;
use stable_rank::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),

    /// Malformed upload; `row` is the 1-based data row when known.
    #[error("{message}")]
    BadRequest { message: String, row: Option<usize> },

    #[error("{message}")]
    Unprocessable { message: String, detail: Option<Value> },

    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::NotFound(format!("unknown {what} `{id}`"))
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        ApiError::Unprocessable { message: message.into(), detail: None }
    }

    /// Errors raised while reading an uploaded dataset.
    pub fn upload(e: CoreError) -> Self {
        let row = match &e {
            CoreError::Parse { row, .. } => Some(*row),
            _ => None,
        };
        ApiError::BadRequest { message: e.to_string(), row }
    }

    pub fn infeasible(why: &Infeasibility) -> Self {
        let detail = match why {
            Infeasibility::Dominated { above, below } => {
                json!({ "reason": "dominated", "above": above, "below": below })
            }
            Infeasibility::EmptyRegion => json!({ "reason": "empty_region" }),
            Infeasibility::OutsideRoi => json!({ "reason": "outside_roi" }),
        };
        ApiError::Unprocessable { message: format!("infeasible ranking: {why}"), detail: Some(detail) }
    }

    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Solver(_) => ApiError::Internal(e.to_string()),
            CoreError::BudgetExceeded { samples, total_samples, ref candidate } => {
                let candidate = candidate.as_ref().map(|c| {
                    json!({
                        "members": c.members,
                        "stability": c.stability,
                        "confidence_error": c.confidence_error,
                    })
                });
                ApiError::Unprocessable {
                    message: e.to_string(),
                    detail: Some(json!({
                        "reason": "budget_exceeded",
                        "samples": samples,
                        "total_samples": total_samples,
                        "candidate": candidate,
                    })),
                }
            }
            other => ApiError::unprocessable(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let mut body = json!({ "error": self.to_string() });
        match self {
            ApiError::BadRequest { row: Some(row), .. } => body["row"] = json!(row),
            ApiError::Unprocessable { detail: Some(detail), .. } => body["detail"] = detail,
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}
