use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use flowledger_core::bpmn::ParseError;
use flowledger_core::ledger::Revert;
use serde_json::{json, Map, Value};

/// Error body: `{error, reason}` plus optional details.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: String,
    pub extra: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, reason: impl Into<String>) -> Self {
        ApiError {
            status,
            reason: reason.into(),
            extra: Map::new(),
        }
    }

    pub fn bad_request(reason: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, reason)
    }

    pub fn not_found(reason: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, reason)
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.extra.insert(key.into(), v.into());
        self
    }
}

/// HTTP status for a revert reason.
pub fn status_of(reason: &str) -> StatusCode {
    match reason {
        "NO_INSTANCE" | "NOT_FOUND" | "Not Found" | "BAD_OPERATION" => StatusCode::NOT_FOUND,
        "NOT_ENABLED" | "ROLE_TAKEN" => StatusCode::CONFLICT,
        "UNAUTHORIZED" | "REJECTED" => StatusCode::FORBIDDEN,
        r if r.starts_with("BAD_")
            || r == "UNKNOWN_ROLE"
            || r == "FLOW_MISMATCH"
            || r == "UNKNOWN_KIND" =>
        {
            StatusCode::BAD_REQUEST
        }
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn category(s: StatusCode) -> &'static str {
    match s {
        StatusCode::BAD_REQUEST => "bad_request",
        StatusCode::FORBIDDEN => "forbidden",
        StatusCode::NOT_FOUND => "not_found",
        StatusCode::CONFLICT => "conflict",
        StatusCode::UNPROCESSABLE_ENTITY => "unprocessable",
        _ => "internal",
    }
}

impl From<Revert> for ApiError {
    fn from(r: Revert) -> Self {
        ApiError::new(status_of(&r.reason), r.reason)
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        let mut err = ApiError::bad_request(e.code()).with("detail", e.to_string());
        if let Some(id) = e.element_id() {
            err = err.with("elementId", id);
        }
        err
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL").with("detail", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = Map::new();
        body.insert("error".into(), json!(category(self.status)));
        body.insert("reason".into(), json!(self.reason));
        body.extend(self.extra);
        (self.status, Json(Value::Object(body))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
