//! Request authentication by route class.
//!
//! Each class is an extractor; a handler's signature therefore fixes the class
//! of its route. Credentials of the wrong kind are rejected, never ignored.

use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use itt_core::identity::TokenError;
use itt_core::model::TokenKind;

use crate::error::{token_error, ApiError, BASIC_CHALLENGE, BEARER_CHALLENGE};
use crate::state::{blocking, AppState};

enum Presented {
    Missing,
    Basic { id: String, secret: String },
    Bearer(String),
    Unsupported,
}

fn presented(parts: &Parts) -> Presented {
    let Some(raw) = parts.headers.get(AUTHORIZATION) else {
        return Presented::Missing;
    };
    let Ok(raw) = raw.to_str() else {
        return Presented::Unsupported;
    };
    let (scheme, value) = raw.trim().split_once(' ').unwrap_or((raw, ""));
    let value = value.trim();
    if scheme.eq_ignore_ascii_case("bearer") && !value.is_empty() {
        return Presented::Bearer(value.to_owned());
    }
    if scheme.eq_ignore_ascii_case("basic") {
        let decoded = STANDARD
            .decode(value)
            .ok()
            .and_then(|b| String::from_utf8(b).ok());
        if let Some((id, secret)) = decoded.as_deref().and_then(|s| s.split_once(':')) {
            return Presented::Basic {
                id: id.to_owned(),
                secret: secret.to_owned(),
            };
        }
    }
    Presented::Unsupported
}

/// A monitor authenticated with HTTP Basic credentials.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub client_id: String,
}

impl FromRequestParts<AppState> for Monitor {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let Presented::Basic { id, secret } = presented(parts) else {
            return Err(ApiError::unauthorized(
                "unauthorized",
                "this route requires monitor basic credentials",
                BASIC_CHALLENGE,
            ));
        };
        let identity = state.identity.clone();
        let client_id = id.clone();
        let ok = blocking(move || Ok(identity.verify_monitor(&id, &secret)?)).await?;
        if !ok {
            return Err(ApiError::unauthorized(
                "invalid_credentials",
                "invalid monitor credentials",
                BASIC_CHALLENGE,
            ));
        }
        Ok(Monitor { client_id })
    }
}

/// A user authenticated with a live access token.
#[derive(Debug, Clone)]
pub struct User {
    pub main_id: String,
    pub is_admin: bool,
    pub token: String,
}

impl FromRequestParts<AppState> for User {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let Presented::Bearer(token) = presented(parts) else {
            return Err(ApiError::unauthorized(
                "unauthorized",
                "this route requires a bearer access token",
                BEARER_CHALLENGE,
            ));
        };
        let identity = state.identity.clone();
        blocking(move || {
            let verified = identity.verify_token(&token)?;
            if verified.kind != TokenKind::Access {
                return Err(token_error(TokenError::WrongKind));
            }
            let is_admin = identity.is_admin(&verified.principal)?;
            Ok(User {
                main_id: verified.principal,
                is_admin,
                token,
            })
        })
        .await
    }
}

/// A user whose account carries the admin flag.
#[derive(Debug, Clone)]
pub struct Admin(pub User);

impl FromRequestParts<AppState> for Admin {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let user = User::from_request_parts(parts, state).await?;
        if !user.is_admin {
            return Err(ApiError::forbidden(
                "forbidden",
                "administrator rights required",
            ));
        }
        Ok(Admin(user))
    }
}
