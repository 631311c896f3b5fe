use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ontrack_core::experiment::ExperimentError;
use ontrack_core::io::{RosterError, StoreError};
use ontrack_core::projection::ProjectionError;
use ontrack_core::{FieldError, ValidationError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    NotFound,
    Internal,
}

/// Error envelope returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub field_errors: Vec<FieldError>,
    #[serde(skip)]
    pub status: Option<u16>,
}

impl ApiError {
    pub fn validation(field_errors: Vec<FieldError>) -> Self {
        let message = ValidationError {
            field_errors: field_errors.clone(),
        }
        .to_string();
        Self {
            code: ErrorCode::Validation,
            message,
            field_errors,
            status: None,
        }
    }

    pub fn field(path: &str, message: impl Into<String>) -> Self {
        Self::validation(vec![FieldError::new(path, message)])
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            code: ErrorCode::NotFound,
            message: message.into(),
            field_errors: Vec::new(),
            status: None,
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: ErrorCode::Internal,
            message: message.into(),
            field_errors: Vec::new(),
            status: None,
        }
    }

    pub fn with_status(mut self, status: StatusCode) -> Self {
        self.status = Some(status.as_u16());
        self
    }

    pub fn status(&self) -> StatusCode {
        if let Some(s) = self.status.and_then(|s| StatusCode::from_u16(s).ok()) {
            return s;
        }
        match self.code {
            ErrorCode::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            tracing::error!(message = %self.message, "request failed");
        }
        (self.status(), Json(self)).into_response()
    }
}

impl From<ValidationError> for ApiError {
    fn from(e: ValidationError) -> Self {
        Self::validation(e.field_errors)
    }
}

impl From<ProjectionError> for ApiError {
    fn from(e: ProjectionError) -> Self {
        match e {
            ProjectionError::ZeroDrawdown => Self::field("d", "drawdown rate must be positive"),
            ProjectionError::Invalid(v) => v.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => Self::not_found(format!("scenario {id} not found")),
            StoreError::Invalid(v) => v.into(),
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<RosterError> for ApiError {
    fn from(e: RosterError) -> Self {
        match e {
            RosterError::Schema(m) => Self::field("roster", m),
            RosterError::TooManyRowErrors { errors, .. } => Self::validation(
                errors
                    .into_iter()
                    .map(|r| {
                        let path = match &r.field {
                            Some(f) => format!("roster.line{}.{f}", r.line),
                            None => format!("roster.line{}", r.line),
                        };
                        FieldError::new(path, r.message)
                    })
                    .collect(),
            ),
            RosterError::Csv(e) => Self::field("roster", e.to_string()),
            RosterError::Io(e) => Self::internal(e.to_string()),
        }
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        let path = match &e {
            ExperimentError::InvalidParam { field, .. } => format!("options.{field}"),
            _ => "roster".to_string(),
        };
        Self::field(&path, e.to_string())
    }
}
