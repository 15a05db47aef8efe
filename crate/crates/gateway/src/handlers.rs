//! Route handlers. Authentication happens in the extractors; handlers only
//! scope, validate and delegate to the core services.

use std::collections::{BTreeSet, HashMap};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use itt_core::identity::{IdentityError, NewUser, TokenPair};
use itt_core::logstore::DEFAULT_SUMMARY_DAYS;
use itt_core::model::{validate_log_submission, Effect, LogSubmission};
use itt_core::policy::PolicyDecision;
use itt_core::storage::UserChanges;
use itt_core::{LogOrder, LogQuery, Timestamp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::auth::{Admin, Monitor, User};
use crate::error::{ApiError, ApiResult};
use crate::state::{blocking, AppState};

const MAX_SUMMARY_DAYS: u32 = 366;

fn backticked(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_owned())
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            let mut err = ApiError::unprocessable("validation_failed", e.to_string());
            err.body.field = backticked(&e.to_string());
            err
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string())
        }
    })
}

type Params = Query<HashMap<String, String>>;

fn param<'a>(params: &'a HashMap<String, String>, name: &str) -> Option<&'a str> {
    params.get(name).map(|v| v.trim()).filter(|v| !v.is_empty())
}

fn ts_param(params: &HashMap<String, String>, name: &str) -> ApiResult<Option<Timestamp>> {
    param(params, name)
        .map(|v| Timestamp::parse(v).map_err(|e| ApiError::bad_param(name, e.to_string())))
        .transpose()
}

fn u32_param(params: &HashMap<String, String>, name: &str) -> ApiResult<Option<u32>> {
    param(params, name)
        .map(|v| {
            v.parse::<u32>().map_err(|_| {
                ApiError::bad_param(name, format!("{name} must be a non-negative integer"))
            })
        })
        .transpose()
}

/// Owner-scoped routes act on the caller's own data. Naming any other owner,
/// even as an administrator, is refused.
async fn ensure_own(state: &AppState, user: &User, requested: Option<&str>) -> ApiResult<()> {
    let Some(requested) = requested.map(str::to_owned) else {
        return Ok(());
    };
    if requested == user.main_id {
        return Ok(());
    }
    let identity = state.identity.clone();
    let resolved = blocking(move || match identity.resolve_identifier(&requested) {
        Ok(main) => Ok(Some(main)),
        Err(IdentityError::UnknownIdentifier(_)) => Ok(None),
        Err(e) => Err(e.into()),
    })
    .await?;
    if resolved.as_deref() == Some(user.main_id.as_str()) {
        Ok(())
    } else {
        Err(ApiError::forbidden(
            "owner_mismatch",
            "requests may only name the authenticated owner",
        )
        .with_field("owner"))
    }
}

// ---- sso -------------------------------------------------------------------

#[derive(Deserialize)]
struct LoginRequest {
    identifier: String,
    password: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenResponse {
    pub token_type: String,
    pub principal: String,
    pub access_token: String,
    pub access_expires_at: Timestamp,
    pub expires_in: i64,
    pub refresh_token: String,
    pub refresh_expires_at: Timestamp,
}

impl From<TokenPair> for TokenResponse {
    fn from(p: TokenPair) -> Self {
        Self {
            token_type: "Bearer".into(),
            principal: p.access.session.principal,
            expires_in: p.access.session.expires_at.unix() - p.access.session.issued_at.unix(),
            access_token: p.access.token,
            access_expires_at: p.access.session.expires_at,
            refresh_token: p.refresh.token,
            refresh_expires_at: p.refresh.session.expires_at,
        }
    }
}

pub async fn login(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<TokenResponse>> {
    let req: LoginRequest = parse_json(&body)?;
    let pair = blocking(move || Ok(state.identity.login(&req.identifier, &req.password)?)).await?;
    Ok(Json(pair.into()))
}

pub async fn logout(State(state): State<AppState>, user: User) -> ApiResult<StatusCode> {
    blocking(move || Ok(state.identity.logout(&user.token)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct RefreshRequest {
    refresh_token: String,
}

pub async fn refresh(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<TokenResponse>> {
    let req: RefreshRequest = parse_json(&body)?;
    let pair = blocking(move || Ok(state.identity.refresh(&req.refresh_token)?)).await?;
    Ok(Json(pair.into()))
}

#[derive(Serialize)]
struct Resolved {
    identifier: String,
    main_id: String,
}

pub async fn resolve(
    State(state): State<AppState>,
    _m: Monitor,
    Query(params): Params,
) -> ApiResult<Response> {
    let identifier = param(&params, "identifier")
        .ok_or_else(|| ApiError::bad_param("identifier", "identifier is required"))?
        .to_owned();
    let main_id = {
        let identifier = identifier.clone();
        blocking(move || Ok(state.identity.resolve_identifier(&identifier)?)).await?
    };
    Ok(Json(Resolved {
        identifier,
        main_id,
    })
    .into_response())
}

// ---- users -----------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateUserRequest {
    main_id: String,
    #[serde(default)]
    secondary_ids: BTreeSet<String>,
    password: String,
    #[serde(default)]
    is_admin: bool,
}

pub async fn list_users(State(state): State<AppState>, Admin(admin): Admin) -> ApiResult<Response> {
    let users = blocking(move || Ok(state.identity.list_users(&admin.main_id)?)).await?;
    Ok(Json(users).into_response())
}

pub async fn create_user(
    State(state): State<AppState>,
    Admin(admin): Admin,
    body: Bytes,
) -> ApiResult<Response> {
    let req: CreateUserRequest = parse_json(&body)?;
    let user = blocking(move || {
        Ok(state.identity.create_user(
            &admin.main_id,
            NewUser {
                main_id: req.main_id,
                secondary_ids: req.secondary_ids,
                password: req.password,
                is_admin: req.is_admin,
            },
        )?)
    })
    .await
    .map_err(|e| match e.body.code {
        "weak_password" => e.with_field("password"),
        _ => e,
    })?;
    Ok((StatusCode::CREATED, Json(user)).into_response())
}

pub async fn get_user(
    State(state): State<AppState>,
    user: User,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let record = blocking(move || Ok(state.identity.get_user(&user.main_id, &id)?)).await?;
    Ok(Json(record).into_response())
}

#[derive(Deserialize)]
struct UpdateUserRequest {
    secondary_ids: Option<BTreeSet<String>>,
    is_admin: Option<bool>,
}

/// Nobody changes a password through this route, administrators included.
pub async fn update_user(
    State(state): State<AppState>,
    user: User,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let raw: serde_json::Map<String, serde_json::Value> = parse_json(&body)?;
    if let Some(field) = raw
        .keys()
        .find(|k| !matches!(k.as_str(), "secondary_ids" | "is_admin"))
    {
        let message = if field.contains("password") {
            format!("{field:?} cannot be set here; passwords are changed by their owner only")
        } else {
            format!("unknown field {field:?}")
        };
        return Err(ApiError::unprocessable("unsupported_field", message).with_field(field.clone()));
    }
    let req: UpdateUserRequest = parse_json(&body)?;
    let record = blocking(move || {
        Ok(state.identity.update_user(
            &user.main_id,
            &id,
            UserChanges {
                secondary_ids: req.secondary_ids,
                is_admin: req.is_admin,
            },
        )?)
    })
    .await?;
    Ok(Json(record).into_response())
}

pub async fn delete_user(
    State(state): State<AppState>,
    Admin(admin): Admin,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    blocking(move || Ok(state.identity.delete_user(&admin.main_id, &id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct PasswordChange {
    current_password: String,
    new_password: String,
}

pub async fn change_password(
    State(state): State<AppState>,
    user: User,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<StatusCode> {
    if id != user.main_id {
        return Err(ApiError::forbidden(
            "forbidden",
            "passwords can only be changed by their owner",
        ));
    }
    let req: PasswordChange = parse_json(&body)?;
    blocking(move || {
        state
            .identity
            .change_password(&user.main_id, &req.current_password, &req.new_password)
            .map_err(|e| match e {
                IdentityError::WeakPassword => ApiError::from(e).with_field("new_password"),
                e => e.into(),
            })
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- logs ------------------------------------------------------------------

fn unknown_party(field: &'static str) -> impl Fn(IdentityError) -> ApiError {
    move |e| match e {
        IdentityError::UnknownIdentifier(id) | IdentityError::InvalidIdentifier(id) => {
            ApiError::unprocessable(
                "unknown_identifier",
                format!("{field} {id:?} is not a registered identifier"),
            )
            .with_field(field)
        }
        e => e.into(),
    }
}

pub async fn ingest(
    State(state): State<AppState>,
    monitor: Monitor,
    body: Bytes,
) -> ApiResult<Response> {
    let submission: LogSubmission = parse_json(&body)?;
    let entry = blocking(move || {
        let draft =
            validate_log_submission(&submission, state.logs.now()).map_err(ApiError::validation)?;
        let owner = state
            .identity
            .resolve_identifier(&draft.owner)
            .map_err(unknown_party("owner"))?;
        let consumer = state
            .identity
            .resolve_identifier(&draft.consumer)
            .map_err(unknown_party("consumer"))?;
        let decision = state
            .policies
            .evaluate(&owner, &consumer, &draft.data_category)?;
        Ok(state
            .logs
            .append(draft.attributed(owner, consumer), decision.effect)?)
    })
    .await?;
    tracing::debug!(monitor = %monitor.client_id, seq = entry.seq, "usage logged");
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

fn log_query(owner: &str, params: &HashMap<String, String>) -> ApiResult<LogQuery> {
    let mut q = LogQuery::for_owner(owner);
    q.from = ts_param(params, "from")?;
    q.to = ts_param(params, "to")?;
    q.consumer = param(params, "consumer").map(str::to_owned);
    q.tool = param(params, "tool").map(str::to_owned);
    q.data_category = param(params, "data_category").map(str::to_owned);
    if let Some(page) = u32_param(params, "page")? {
        q.page = page;
    }
    if let Some(per_page) = u32_param(params, "per_page")? {
        q.per_page = per_page;
    }
    q.order = match param(params, "order") {
        None | Some("occurred_at_desc") | Some("desc") => LogOrder::OccurredAtDesc,
        Some("occurred_at_asc") | Some("asc") => LogOrder::OccurredAtAsc,
        Some(other) => {
            return Err(ApiError::bad_param(
                "order",
                format!("order must be occurred_at_desc or occurred_at_asc, got {other:?}"),
            ))
        }
    };
    Ok(q)
}

pub async fn list_logs(
    State(state): State<AppState>,
    user: User,
    Query(params): Params,
) -> ApiResult<Response> {
    ensure_own(&state, &user, param(&params, "owner")).await?;
    let q = log_query(&user.main_id, &params)?;
    let page = blocking(move || Ok(state.logs.query(&q)?)).await?;
    Ok(Json(page).into_response())
}

pub async fn summary(
    State(state): State<AppState>,
    user: User,
    Query(params): Params,
) -> ApiResult<Response> {
    ensure_own(&state, &user, param(&params, "owner")).await?;
    let days = u32_param(&params, "days")?.unwrap_or(DEFAULT_SUMMARY_DAYS);
    if !(1..=MAX_SUMMARY_DAYS).contains(&days) {
        return Err(ApiError::bad_param(
            "days",
            format!("days must be between 1 and {MAX_SUMMARY_DAYS}"),
        ));
    }
    let summary = blocking(move || {
        // timestamps are whole seconds, so the current second has partly happened
        let now = state.logs.now().plus_secs(1);
        Ok(state.logs.summarize(&user.main_id, now, days)?)
    })
    .await?;
    Ok(Json(summary).into_response())
}

pub async fn export(
    State(state): State<AppState>,
    user: User,
    Query(params): Params,
) -> ApiResult<Response> {
    ensure_own(&state, &user, param(&params, "owner")).await?;
    let to = ts_param(&params, "to")?;
    let from = ts_param(&params, "from")?;
    let report = blocking(move || {
        let to = to.unwrap_or_else(|| state.logs.now());
        let from = from.unwrap_or_else(|| {
            to.minus_secs(i64::from(DEFAULT_SUMMARY_DAYS) * Timestamp::SECONDS_PER_DAY)
        });
        Ok(state.logs.export_report(&user.main_id, from, to)?)
    })
    .await?;
    let disposition =
        HeaderValue::from_str(&format!("attachment; filename=\"{}\"", report.filename))
            .map_err(ApiError::internal)?;
    Ok((
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static(report.content_type),
            ),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        report.body,
    )
        .into_response())
}

pub async fn verify_chain(State(state): State<AppState>, _admin: Admin) -> ApiResult<Response> {
    let verdict = blocking(move || Ok(state.logs.verify_chain()?)).await?;
    Ok(Json(verdict).into_response())
}

// ---- policies --------------------------------------------------------------

#[derive(Deserialize)]
struct PolicyRequest {
    #[serde(default)]
    owner: Option<String>,
    subject: String,
    data_category: String,
    effect: String,
}

pub async fn list_policies(
    State(state): State<AppState>,
    user: User,
    Query(params): Params,
) -> ApiResult<Response> {
    ensure_own(&state, &user, param(&params, "owner")).await?;
    let rules = blocking(move || Ok(state.policies.list_policies(&user.main_id)?)).await?;
    Ok(Json(rules).into_response())
}

pub async fn set_policy(
    State(state): State<AppState>,
    user: User,
    body: Bytes,
) -> ApiResult<Response> {
    let req: PolicyRequest = parse_json(&body)?;
    ensure_own(&state, &user, req.owner.as_deref()).await?;
    let effect: Effect = req
        .effect
        .trim()
        .to_ascii_lowercase()
        .parse()
        .map_err(|()| {
            ApiError::unprocessable("validation_failed", "effect must be allow or deny")
                .with_field("effect")
        })?;
    let rule = blocking(move || {
        // registered subjects are stored by main identifier, like log consumers
        let subject = match state.identity.resolve_identifier(&req.subject) {
            Ok(main) => main,
            Err(_) => req.subject,
        };
        Ok(state
            .policies
            .set_policy(&user.main_id, &subject, &req.data_category, effect)?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(rule)).into_response())
}

pub async fn delete_policy(
    State(state): State<AppState>,
    user: User,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    blocking(move || Ok(state.policies.delete_policy(&user.main_id, &id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct EvaluateRequest {
    owner: String,
    consumer: String,
    data_category: String,
}

#[derive(Serialize)]
struct Evaluation {
    owner: String,
    consumer: String,
    data_category: String,
    #[serde(flatten)]
    decision: PolicyDecision,
}

pub async fn evaluate(
    State(state): State<AppState>,
    _m: Monitor,
    body: Bytes,
) -> ApiResult<Response> {
    let req: EvaluateRequest = parse_json(&body)?;
    let data_category = req.data_category.trim().to_owned();
    if data_category.is_empty() || data_category == "*" {
        return Err(ApiError::unprocessable(
            "validation_failed",
            "data_category must be a concrete category",
        )
        .with_field("data_category"));
    }
    let out = blocking(move || {
        let owner = state
            .identity
            .resolve_identifier(&req.owner)
            .map_err(unknown_party("owner"))?;
        let consumer = state
            .identity
            .resolve_identifier(&req.consumer)
            .map_err(unknown_party("consumer"))?;
        let decision = state.policies.evaluate(&owner, &consumer, &data_category)?;
        Ok(Evaluation {
            owner,
            consumer,
            data_category,
            decision,
        })
    })
    .await?;
    Ok(Json(out).into_response())
}

// ---- meta ------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub store_ok: bool,
    pub identity_ok: bool,
    pub version: String,
}

pub async fn health(State(state): State<AppState>) -> Response {
    let checked =
        blocking(move || Ok((state.logs.health().is_ok(), state.identity.health().is_ok()))).await;
    let (store_ok, identity_ok) = checked.unwrap_or((false, false));
    let healthy = store_ok && identity_ok;
    let body = Health {
        status: if healthy { "ok" } else { "unavailable" }.into(),
        store_ok,
        identity_ok,
        version: crate::VERSION.into(),
    };
    let status = if healthy {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    (status, Json(body)).into_response()
}

pub async fn openapi() -> Response {
    (
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        crate::openapi::DOCUMENT,
    )
        .into_response()
}

pub async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed on this route",
    )
}
