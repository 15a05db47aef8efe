//! Uniform JSON error bodies: `{"error": {"code", "message", "field"?}}`.

use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use itt_core::identity::{IdentityError, TokenError};
use itt_core::model::{FieldError, ValidationErrors};
use itt_core::{LogError, PolicyError, StoreError};
use serde::Serialize;

#[derive(Debug, Serialize)]
struct Body<'a> {
    error: &'a ErrorBody,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<FieldError>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
    challenge: Option<&'static str>,
}

pub type ApiResult<T> = Result<T, ApiError>;

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                field: None,
                details: Vec::new(),
            },
            challenge: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.body.field = Some(field.into());
        self
    }

    pub fn unauthorized(
        code: &'static str,
        message: impl Into<String>,
        challenge: &'static str,
    ) -> Self {
        let mut e = Self::new(StatusCode::UNAUTHORIZED, code, message);
        e.challenge = Some(challenge);
        e
    }

    pub fn forbidden(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, code, message)
    }

    pub fn bad_param(field: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_parameter", message).with_field(field)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(err: impl std::fmt::Display) -> Self {
        tracing::error!(error = %err, "request failed");
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "internal server error",
        )
    }

    pub fn validation(errors: ValidationErrors) -> Self {
        let mut e = Self::unprocessable("validation_failed", errors.to_string());
        e.body.field = errors.0.first().map(|f| f.field.clone());
        e.body.details = errors.0;
        e
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut res = (self.status, Json(Body { error: &self.body })).into_response();
        if let Some(challenge) = self.challenge {
            res.headers_mut().insert(
                header::WWW_AUTHENTICATE,
                HeaderValue::from_static(challenge),
            );
        }
        res
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Unavailable(msg) => {
                Self::new(StatusCode::SERVICE_UNAVAILABLE, "store_unavailable", msg)
            }
            StoreError::NotFound => Self::not_found("not found"),
            StoreError::DuplicateIdentifier(id) => Self::new(
                StatusCode::CONFLICT,
                "duplicate_identifier",
                format!("identifier {id:?} is already registered"),
            ),
            StoreError::LastAdmin => Self::new(StatusCode::CONFLICT, "last_admin", e.to_string()),
            other => Self::internal(other),
        }
    }
}

impl From<LogError> for ApiError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Store(s) => s.into(),
            LogError::InvalidRange { .. } => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_range", e.to_string())
                    .with_field("from")
            }
            LogError::PerPage(_) => Self::bad_param("per_page", e.to_string()),
            LogError::Page => Self::bad_param("page", e.to_string()),
            LogError::Days => Self::bad_param("days", e.to_string()),
        }
    }
}

impl From<PolicyError> for ApiError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Store(s) => s.into(),
            PolicyError::Empty { field } => {
                Self::unprocessable("validation_failed", e.to_string()).with_field(field)
            }
            PolicyError::WildcardOwner => {
                Self::unprocessable("validation_failed", e.to_string()).with_field("owner")
            }
            PolicyError::NotFound => Self::not_found(e.to_string()),
            PolicyError::NotOwner => Self::forbidden("not_owner", e.to_string()),
        }
    }
}

pub const BEARER_CHALLENGE: &str = "Bearer realm=\"itt\"";
pub const BASIC_CHALLENGE: &str = "Basic realm=\"itt\"";

pub fn token_error(e: TokenError) -> ApiError {
    let code = match e {
        TokenError::Expired => "token_expired",
        TokenError::Revoked => "token_revoked",
        TokenError::WrongKind => "wrong_token_kind",
        TokenError::Malformed | TokenError::BadSignature => "invalid_token",
    };
    ApiError::unauthorized(code, e.to_string(), BEARER_CHALLENGE)
}

impl From<IdentityError> for ApiError {
    fn from(e: IdentityError) -> Self {
        match e {
            IdentityError::Store(s) => s.into(),
            IdentityError::Hash(h) => Self::internal(h),
            IdentityError::NotAuthorized => Self::forbidden("forbidden", e.to_string()),
            IdentityError::DuplicateIdentifier(_) => {
                Self::new(StatusCode::CONFLICT, "duplicate_identifier", e.to_string())
            }
            IdentityError::InvalidIdentifier(_) => {
                Self::unprocessable("invalid_identifier", e.to_string())
            }
            IdentityError::UnknownIdentifier(_) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_identifier", e.to_string())
            }
            IdentityError::WeakPassword => Self::unprocessable("weak_password", e.to_string()),
            IdentityError::AuthenticationFailed => {
                Self::unauthorized("authentication_failed", e.to_string(), BEARER_CHALLENGE)
            }
            IdentityError::WrongPassword => {
                Self::forbidden("wrong_password", e.to_string()).with_field("current_password")
            }
            IdentityError::Token(t) => token_error(t),
            IdentityError::NotFound => Self::not_found(e.to_string()),
            IdentityError::LastAdmin => {
                Self::new(StatusCode::CONFLICT, "last_admin", e.to_string())
            }
        }
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        Self::internal(e)
    }
}
